#include <doctest.h>

#include <cmath>
#include <sstream>

#include "clef/autodiff/ops.hpp"
#include "clef/condition_registry.hpp"
#include "clef/encoders.hpp"
#include "clef/errors.hpp"
#include "clef/layers.hpp"
#include "clef/temporal.hpp"
#include "../support/gradcheck.hpp"

using namespace clef;

// ---- timestamps -----------------------------------------------------------

TEST_CASE("timestamp parsing, printing and validation") {
  const Timestamp t = Timestamp::parse("2004-02-29T13:45");
  CHECK(t.year == 2004);
  CHECK(t.month == 2);
  CHECK(t.day == 29);
  CHECK(t.hour == 13);
  CHECK(t.iso() == "2004-02-29T13:00");
  CHECK(Timestamp::parse("2004-02-29T13") == t);
  CHECK_THROWS_AS((Timestamp{2003, 2, 29, 0}.validate()), InvalidArgument);
  CHECK_THROWS_AS(Timestamp::parse("2003-02-29T00:00"), ParseError);
  CHECK_THROWS_AS(Timestamp::parse("2003-13-01T00:00"), ParseError);
  CHECK_THROWS_AS(Timestamp::parse("yesterday"), ParseError);
  CHECK_THROWS_AS(Timestamp::parse("2003-01-01T24:00"), ParseError);
}

TEST_CASE("hour arithmetic crosses leap days") {
  const Timestamp a{2000, 2, 28, 0};
  const Timestamp b{2000, 3, 1, 0};
  CHECK(b.hours_since_epoch() - a.hours_since_epoch() == 48);
  CHECK(a.plus_hours(48) == b);
  CHECK(Timestamp{1999, 12, 31, 23}.plus_hours(1) == Timestamp{2000, 1, 1, 0});
  for (std::int64_t h : {-100000, -1, 0, 7, 123456}) {
    CHECK(Timestamp::from_hours_since_epoch(h).hours_since_epoch() == h);
  }
}

TEST_CASE("benchmark grid spacing grows by ten hours per step") {
  CHECK(step_to_timestamp(0) == Timestamp{2000, 1, 1, 0});
  CHECK(step_to_timestamp(3) == Timestamp{2000, 1, 3, 12});  // 10 + 20 + 30 hours
  for (std::size_t k = 1; k < 40; ++k) {
    const auto gap = step_to_timestamp(k).hours_since_epoch() - step_to_timestamp(k - 1).hours_since_epoch();
    CHECK(gap == static_cast<std::int64_t>(10 * k));
    CHECK(next_grid_timestamp(step_to_timestamp(k - 1), k) == step_to_timestamp(k));
  }
}

TEST_CASE("sinusoidal encoding alternates sin and cos") {
  const auto e = sinusoidal_encoding(3.0, 6);
  CHECK(e[0] == doctest::Approx(std::sin(3.0)));
  CHECK(e[1] == doctest::Approx(std::cos(3.0)));
  CHECK(e[2] == doctest::Approx(std::sin(3.0 / std::pow(10000.0, 2.0 / 6))));
  CHECK(e[5] == doctest::Approx(std::cos(3.0 / std::pow(10000.0, 4.0 / 6))));
  const auto zero = sinusoidal_encoding(0.0, 4);
  CHECK(zero == std::vector<double>{0, 1, 0, 1});
}

TEST_CASE("time deltas are differences of learned embeddings") {
  std::mt19937_64 rng(1);
  TimeEncoder enc(5, rng);
  const Timestamp a{2000, 1, 3, 4}, b{2000, 2, 9, 17}, c{2001, 6, 30, 23};
  const auto ab = enc.delta(a, b).to_vector();
  const auto bc = enc.delta(b, c).to_vector();
  const auto ac = enc.delta(a, c).to_vector();
  for (std::size_t k = 0; k < 5; ++k) CHECK(ab[k] + bc[k] == doctest::Approx(ac[k]).epsilon(1e-12));
  for (double v : enc.delta(a, a).to_vector()) CHECK(v == 0.0);
  // Oracle: sinusoid(year) + month + day + hour rows.
  const auto h = enc.encode(b).to_vector();
  const auto s = sinusoidal_encoding(0.0, 5);
  for (std::size_t k = 0; k < 5; ++k) {
    const double expect = s[k] + enc.month_table().at(1, k) + enc.day_table().at(8, k) + enc.hour_table().at(17, k);
    CHECK(h[k] == doctest::Approx(expect).epsilon(1e-14));
  }
}

// ---- condition registry ---------------------------------------------------

TEST_CASE("hashed registry is deterministic, unit norm, and none is zero") {
  auto r = ConditionRegistry::hashed(16, 7);
  const auto a = r.get("TF_GATA1");
  CHECK(a == r.get("TF_GATA1"));
  double n = 0;
  for (double v : a) n += v * v;
  CHECK(n == doctest::Approx(1.0));
  for (double v : r.get("none")) CHECK(v == 0.0);
  CHECK(r.get("TF_GATA1") != ConditionRegistry::hashed(16, 8).get("TF_GATA1"));
  CHECK(r.get("TF_GATA1") != r.get("TF_GATA2"));
}

TEST_CASE("combine is the arithmetic mean and empty sets map to zero") {
  auto r = ConditionRegistry::hashed(4, 0);
  const std::vector<std::string> both{"a", "b"};
  const auto m = r.combine(both);
  const auto a = r.get("a"), b = r.get("b");
  for (std::size_t k = 0; k < 4; ++k) CHECK(m[k] == doctest::Approx(0.5 * (a[k] + b[k])));
  CHECK(r.combine({}) == std::vector<double>(4, 0.0));
}

TEST_CASE("strict registry rejects unknown conditions and round-trips through text") {
  auto r = ConditionRegistry::strict(3);
  r.insert("drugA", {0.1, -0.2, 0.3});
  r.insert("drugB", {1.0 / 3.0, 0.0, 2.0});
  CHECK_THROWS_AS(r.get("drugC"), UnknownCondition);
  CHECK_THROWS_AS(r.insert("none", {0, 0, 0}), InvalidArgument);
  CHECK_THROWS_AS(r.insert("drugD", {0, 0}), ShapeMismatch);
  std::stringstream io;
  r.write(io);
  const auto back = ConditionRegistry::read(io);
  CHECK(back.get("drugB") == r.get("drugB"));
  CHECK(back.mode() == ConditionRegistry::Mode::strict);
  std::stringstream bad("clef-cond v2 3\n");
  CHECK_THROWS_AS(ConditionRegistry::read(bad), ParseError);
  std::stringstream short_row("clef-cond v1 3\ndrugA\t1 2\n");
  CHECK_THROWS(ConditionRegistry::read(short_row));
}

// ---- layers ---------------------------------------------------------------

TEST_CASE("linear layer is x W + b") {
  std::mt19937_64 rng(2);
  Linear lin(3, 2, rng, "lin");
  lin.bias().mutable_data()[1] = 0.5;
  ad::Tensor x = ad::Tensor::matrix(1, 3, {1, 2, 3});
  const auto y = lin.forward(x).to_vector();
  for (std::size_t j = 0; j < 2; ++j) {
    double s = lin.bias().data()[j];
    for (std::size_t i = 0; i < 3; ++i) s += x.at(0, i) * lin.weight().at(i, j);
    CHECK(y[j] == doctest::Approx(s));
  }
  CHECK_THROWS_AS(lin.forward(ad::Tensor::zeros({1, 2})), ShapeMismatch);
}

TEST_CASE("gru step matches a scalar transcription") {
  std::mt19937_64 rng(3);
  GruCell cell(2, 3, rng, "gru");
  const auto params = cell.parameters();
  ad::Tensor x = ad::Tensor::matrix(1, 2, {0.4, -1.1});
  ad::Tensor h = ad::Tensor::matrix(1, 3, {0.2, -0.3, 0.5});
  const auto out = cell.step(cell.project_inputs(x), h).to_vector();
  const ad::Tensor& wi = params[0].tensor;  // [2 x 9]
  const ad::Tensor& bi = params[1].tensor;
  const ad::Tensor& wr = params[2].tensor;  // [3 x 9]
  const ad::Tensor& br = params[3].tensor;
  auto proj = [](const ad::Tensor& v, const ad::Tensor& w, const ad::Tensor& b, std::size_t col) {
    double s = b.data()[col];
    for (std::size_t i = 0; i < v.cols(); ++i) s += v.at(0, i) * w.at(i, col);
    return s;
  };
  auto sig = [](double v) { return 1 / (1 + std::exp(-v)); };
  for (std::size_t k = 0; k < 3; ++k) {
    const double z = sig(proj(x, wi, bi, k) + proj(h, wr, br, k));
    const double r = sig(proj(x, wi, bi, 3 + k) + proj(h, wr, br, 3 + k));
    const double n = std::tanh(proj(x, wi, bi, 6 + k) + r * proj(h, wr, br, 6 + k));
    CHECK(out[k] == doctest::Approx((1 - z) * n + z * h.at(0, k)).epsilon(1e-13));
  }
}

TEST_CASE("dropout is inert outside training and rescales kept units") {
  std::mt19937_64 rng(4);
  ad::Tensor x = ad::Tensor::ones({1, 1000});
  CHECK(dropout(x, 0.5, {}).to_vector() == x.to_vector());
  const auto y = dropout(x, 0.5, ForwardContext{true, &rng}).to_vector();
  std::size_t kept = 0;
  for (double v : y) {
    CHECK((v == 0.0 || v == 2.0));
    kept += v > 0;
  }
  CHECK(kept > 400);
  CHECK(kept < 600);
}

// ---- encoders -------------------------------------------------------------

namespace {

SequenceBatch random_batch(std::size_t len, std::size_t batch, std::size_t in, std::size_t hidden,
                           std::mt19937_64& rng) {
  return SequenceBatch{len, batch, ad::Tensor::randn({len * batch, in}, rng, 1.0),
                       ad::Tensor::randn({len * batch, hidden}, rng, 0.1)};
}

EncoderConfig small_config(EncoderKind kind) {
  EncoderConfig c;
  c.kind = kind;
  c.input_dim = 3;
  c.hidden_dim = 4;
  c.layers = 2;
  c.heads = 2;
  c.dropout = 0.2;
  return c;
}

}  // namespace

TEST_CASE("encoders are causal: later steps never change earlier states") {
  for (auto kind : {EncoderKind::recurrent, EncoderKind::attention}) {
    std::mt19937_64 rng(5);
    auto enc = make_encoder(small_config(kind), rng);
    SequenceBatch a = random_batch(6, 2, 3, 4, rng);
    SequenceBatch b = a;
    b.features = a.features.detach();
    // Perturb the last two steps of both sequences.
    for (std::size_t r = 8; r < 12; ++r)
      for (std::size_t c = 0; c < 3; ++c) b.features.mutable_data()[r * 3 + c] += 5.0;
    const auto sa = enc->encode_all(a, {});
    const auto sb = enc->encode_all(b, {});
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 4; ++c) CHECK(sa.at(r, c) == doctest::Approx(sb.at(r, c)).epsilon(1e-13));
    bool changed = false;
    for (std::size_t c = 0; c < 4; ++c) changed |= sa.at(10, c) != sb.at(10, c);
    CHECK(changed);
  }
}

TEST_CASE("batched encoding equals per-sequence encoding") {
  for (auto kind : {EncoderKind::recurrent, EncoderKind::attention}) {
    std::mt19937_64 rng(6);
    auto enc = make_encoder(small_config(kind), rng);
    SequenceBatch both = random_batch(4, 2, 3, 4, rng);
    const auto all = enc->encode_all(both, {});
    for (std::size_t s = 0; s < 2; ++s) {
      std::vector<std::size_t> rows;
      for (std::size_t t = 0; t < 4; ++t) rows.push_back(t * 2 + s);
      SequenceBatch one{4, 1, ad::gather_rows(both.features, rows), ad::gather_rows(both.time_embedding, rows)};
      const auto single = enc->encode_all(one, {});
      for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t c = 0; c < 4; ++c) CHECK(single.at(t, c) == doctest::Approx(all.at(t * 2 + s, c)).epsilon(1e-13));
    }
    const auto last = enc->encode(both, {});
    CHECK(last.rows() == 2);
    CHECK(last.at(1, 2) == all.at(7, 2));
  }
}

TEST_CASE("encoder configuration and shape errors") {
  std::mt19937_64 rng(7);
  auto c = small_config(EncoderKind::attention);
  c.heads = 3;
  CHECK_THROWS_AS(make_encoder(c, rng), InvalidArgument);
  c = small_config(EncoderKind::recurrent);
  c.dropout = 1.0;
  CHECK_THROWS_AS(make_encoder(c, rng), InvalidArgument);
  CHECK_THROWS_AS(parse_encoder_kind("lstm"), InvalidArgument);
  auto enc = make_encoder(small_config(EncoderKind::recurrent), rng);
  SequenceBatch bad = random_batch(3, 1, 2, 4, rng);
  CHECK_THROWS_AS(enc->encode_all(bad, {}), ShapeMismatch);
  SequenceBatch empty{0, 1, ad::Tensor::zeros({1, 3}), ad::Tensor::zeros({1, 4})};
  CHECK_THROWS_AS(enc->encode_all(empty, {}), InvalidArgument);
}

TEST_CASE("encoder gradients match finite differences") {
  for (auto kind : {EncoderKind::recurrent, EncoderKind::attention}) {
    std::mt19937_64 rng(8);
    auto enc = make_encoder(small_config(kind), rng);
    SequenceBatch batch = random_batch(4, 2, 3, 4, rng);
    ad::Tensor target = ad::Tensor::randn({8, 4}, rng, 1.0);
    auto loss = [&] { return ad::mse_loss(enc->encode_all(batch, {}), target); };
    const auto r = testing::gradcheck(enc->parameters(), loss);
    INFO(to_string(kind) << " " << r.worst);
    CHECK(r.failures == 0);
  }
}
