#include <doctest.h>

#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include "clef/counterfactual.hpp"
#include "clef/data/synthetic.hpp"
#include "clef/data/tumor.hpp"
#include "clef/errors.hpp"
#include "clef/io.hpp"

using namespace clef;
using io::Json;

namespace {

std::string error_of(const std::string& text) {
  std::istringstream in(text);
  try {
    io::read_dataset(in, "mem");
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

std::string record(const std::string& id, const std::string& extra = "") {
  return R"({"id":")" + id +
         R"(","timestamps":["2000-01-01T00:00","2000-01-01T10:00"],"values":[[1.0],[2.0]],"conditions":[["none"],["a"]])" +
         extra + "}";
}

ModelConfig small_model(bool ffn) {
  ModelConfig c;
  c.variables = 2;
  c.condition_dim = 4;
  c.hidden_dim = ffn ? 3 : 0;
  c.ffn_enabled = ffn;
  c.encoder.layers = 1;
  c.encoder.heads = 1;
  return c.resolved();
}

}  // namespace

TEST_CASE("hex encoding round-trips special values bit for bit") {
  const std::vector<double> v{0.0, -0.0, 1.0 / 3.0, std::numeric_limits<double>::quiet_NaN(),
                              -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::denorm_min(),
                              -123456.789e200};
  const std::string hex = io::hex_encode(v);
  CHECK(hex.size() == 16 * v.size());
  CHECK(hex.substr(16, 16) == "0000000000000080");  // -0 little-endian
  const auto back = io::hex_decode(hex);
  REQUIRE(back.size() == v.size());
  for (std::size_t k = 0; k < v.size(); ++k)
    CHECK(std::bit_cast<std::uint64_t>(back[k]) == std::bit_cast<std::uint64_t>(v[k]));
  CHECK_THROWS_AS(io::hex_decode("abc"), ParseError);
  CHECK_THROWS_AS(io::hex_decode("zz00000000000000"), ParseError);
}

TEST_CASE("synthetic datasets round-trip through JSON lines") {
  data::GeneratorConfig g;
  g.variables = 3;
  g.conditions = 2;
  g.trajectories = 5;
  g.noise_sigma = 0.01;
  const auto records = data::generate_cf_dataset(g);
  std::stringstream buffer;
  io::write_dataset(buffer, records, Json{{"variables", {"a", "b", "c"}}});
  const auto file = io::read_dataset(buffer);
  CHECK(file.trajectories == records);
  CHECK(file.header.at("format") == "clef-dataset");
  CHECK(file.variable_names() == std::vector<std::string>{"a", "b", "c"});
  std::stringstream bare;
  io::write_dataset(bare, records);
  CHECK(io::read_dataset(bare).variable_names() == std::vector<std::string>{"x0", "x1", "x2"});
}

TEST_CASE("tumor datasets keep enough state to re-simulate futures") {
  data::TumorSimConfig c;
  c.gamma = 3.0;
  c.seed = 2;
  const auto cohort = data::simulate_cohort(c, 4);
  std::stringstream buffer;
  io::write_tumor_dataset(buffer, c, cohort);
  const auto file = io::read_dataset(buffer);
  REQUIRE(file.patients.size() == 4);
  const auto back = io::tumor_config_from_json(file.header.at("tumor"));
  CHECK(back.gamma == 3.0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(file.patients[i].volumes == cohort[i].volumes);
    CHECK(file.patients[i].treatments == cohort[i].treatments);
    CHECK(file.patients[i].noise == cohort[i].noise);
    CHECK(data::make_single_sliding(back, file.patients[i], i, 3).front().volumes ==
          data::make_single_sliding(c, cohort[i], i, 3).front().volumes);
  }
}

TEST_CASE("dataset errors carry the source and line number") {
  CHECK(error_of(record("a") + "\n{not json\n").rfind("mem:2: malformed JSON", 0) == 0);
  CHECK(error_of(record("a") + "\n" + record("a")).find("mem:2: duplicate id 'a'") != std::string::npos);
  CHECK(error_of(record("b", R"(,"cf_of":"zz","divergence":1)")).find("unknown original 'zz'") != std::string::npos);
  {
    std::istringstream in(record("b", R"(,"cf_of":"zz","divergence":1)"));
    CHECK(io::read_dataset(in, "mem", {"zz"}).trajectories.front().cf_of == "zz");
  }
  CHECK(error_of(R"({"id":"a","timestamps":[],"values":[]})").find("mem:1: missing field 'conditions'") !=
        std::string::npos);
  CHECK(error_of(R"({"format":"clef-dataset","version":7})").find("mem:1: unsupported dataset version 7") !=
        std::string::npos);
  CHECK(error_of(R"({"format":"clef-dataset"})").find("unsupported dataset version") != std::string::npos);
  const std::string bad_time = R"({"id":"a","timestamps":["2001-02-30T00:00"],"values":[[1]],"conditions":[["none"]]})";
  CHECK(error_of(bad_time).find("mem:1: bad timestamp") != std::string::npos);
  const std::string decreasing =
      R"({"id":"a","timestamps":["2000-01-02T00:00","2000-01-01T00:00"],"values":[[1],[2]],"conditions":[["none"],["none"]]})";
  CHECK(error_of(decreasing).rfind("mem:1:", 0) == 0);
  CHECK(error_of(record("a") + "\n\n" + record("b")).empty());
}

TEST_CASE("checkpoints round-trip bit for bit and reproduce predictions") {
  for (const char* kind : {"clef", "no-concept"}) {
    auto model = make_model(kind, small_model(true), ConditionRegistry::hashed(4, 9), 21);
    model->set_scale({1.5, 0.25});
    model->set_variable_names({"u", "v"});
    const auto ckpt = io::make_checkpoint(*model, {"t1", "t2"});
    std::stringstream buffer;
    io::write_checkpoint(buffer, ckpt);
    const std::string first = buffer.str();
    const auto read = io::read_checkpoint(buffer);
    std::stringstream again;
    io::write_checkpoint(again, read);
    CHECK(again.str() == first);
    CHECK(read.train_ids == std::vector<std::string>{"t1", "t2"});

    const auto loaded = io::load_model(read);
    CHECK(loaded->kind() == kind);
    CHECK(loaded->scale() == model->scale());
    CHECK(loaded->variable_names() == model->variable_names());
    CHECK(snapshot(loaded->parameters()) == snapshot(model->parameters()));
    const Trajectory t = make_grid_trajectory("q", {{1.0, 2.0}, {1.5, 1.0}, {0.7, 1.1}}, {{"none"}, {"a"}, {"none"}});
    const Query q{2, {"b"}, step_to_timestamp(4), 4};
    CHECK(loaded->predict(t, std::span(&q, 1)) == model->predict(t, std::span(&q, 1)));
  }
}

TEST_CASE("strict registries survive a checkpoint") {
  auto reg = ConditionRegistry::strict(4);
  reg.insert("drug", {0.1, 0.2, 0.3, 1.0 / 7.0});
  ClefModel model(small_model(false), reg, 3);
  const auto loaded = io::load_model(io::checkpoint_from_json(io::checkpoint_to_json(io::make_checkpoint(model))));
  CHECK(loaded->registry().mode() == ConditionRegistry::Mode::strict);
  CHECK(loaded->registry().get("drug") == reg.get("drug"));
  CHECK_THROWS_AS(loaded->registry().get("other"), UnknownCondition);
}

TEST_CASE("checkpoint version and shape mismatches are rejected") {
  ClefModel model(small_model(false), ConditionRegistry::hashed(4), 3);
  Json j = io::checkpoint_to_json(io::make_checkpoint(model));
  Json wrong = j;
  wrong["format_version"] = 2;
  CHECK_THROWS_AS(io::checkpoint_from_json(wrong), ParseError);
  auto ckpt = io::checkpoint_from_json(j);
  ckpt.blocks[0].shape = {ckpt.blocks[0].shape[1], ckpt.blocks[0].shape[0]};
  if (ckpt.blocks[0].shape[0] != ckpt.blocks[0].shape[1]) CHECK_THROWS_AS(io::load_model(ckpt), ParseError);
  ckpt = io::checkpoint_from_json(j);
  ckpt.blocks.pop_back();
  CHECK_THROWS_AS(io::load_model(ckpt), ParseError);
  ckpt = io::checkpoint_from_json(j);
  CHECK_THROWS_AS(io::load_outcome_model(ckpt), ParseError);
  std::istringstream garbage("{\"format_version\": 1}");
  CHECK_THROWS_AS(io::read_checkpoint(garbage), ParseError);
}

TEST_CASE("outcome checkpoints round-trip") {
  cf::OutcomeConfig c;
  c.head = cf::HeadMode::plain;
  c.balancing = cf::Balancing::gradient_reversal;
  c.hidden = 5;
  c.condition_dim = 4;
  c.lambda = 0.3;
  cf::OutcomePredictor model(c, ConditionRegistry::hashed(4, 2), 17);
  model.set_scale(42.5);
  const auto loaded = io::load_outcome_model(io::checkpoint_from_json(io::checkpoint_to_json(io::make_checkpoint(model, 17))));
  CHECK(loaded->kind() == "plain+gr");
  CHECK(loaded->scale() == 42.5);
  CHECK(loaded->config().lambda == 0.3);
  CHECK(snapshot(loaded->parameters()) == snapshot(model.parameters()));
}

TEST_CASE("report rows render as json and csv") {
  MetricReport r;
  r.overall = Metrics{0.5, 0.75, std::nullopt, 4};
  r.per_horizon[2] = Metrics{0.25, 0.5, 0.9, 2};
  const auto rows = r.rows();
  const auto j = Json::parse(io::format_json(rows));
  CHECK(j.size() == rows.size());
  CHECK(j[0]["metric"] == "mae");
  CHECK(j[0]["value"] == 0.5);
  CHECK(j[2]["value"].is_null());
  CHECK(j[4]["horizon"] == 2);
  const std::string csv = io::format_csv(rows);
  CHECK(csv.rfind("metric,scope,horizon,value\n", 0) == 0);
  CHECK(csv.find("r2,overall,,\n") != std::string::npos);
  CHECK(csv.find("mae,horizon,2,0.25\n") != std::string::npos);
  const std::vector<double> nrmse{1.5, 2.5};
  const auto cf_rows = io::counterfactual_rows(nrmse);
  CHECK(cf_rows[1].metric == "nrmse_percent");
  CHECK(cf_rows[1].horizon == 2u);
  CHECK(io::format_rows(rows, "csv") == csv);
  CHECK_THROWS_AS(io::format_rows(rows, "xml"), InvalidArgument);
}
