#include "clef/encoders.hpp"

#include <cmath>

#include "clef/autodiff/ops.hpp"
#include "clef/errors.hpp"

namespace clef {

std::string to_string(EncoderKind kind) {
  return kind == EncoderKind::recurrent ? "recurrent" : "attention";
}

EncoderKind parse_encoder_kind(const std::string& text) {
  if (text == "recurrent") return EncoderKind::recurrent;
  if (text == "attention") return EncoderKind::attention;
  throw InvalidArgument("unknown encoder kind '" + text + "'");
}

void EncoderConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0) throw InvalidArgument("encoder dimensions must be positive");
  if (layers == 0) throw InvalidArgument("encoder needs at least one layer");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout must lie in [0, 1)");
  if (kind == EncoderKind::attention && (heads == 0 || hidden_dim % heads != 0)) {
    throw InvalidArgument("attention hidden size must be divisible by the head count");
  }
}

ad::Tensor SequenceEncoder::encode(const SequenceBatch& batch, const ForwardContext& ctx) const {
  ad::Tensor all = encode_all(batch, ctx);
  return ad::slice_rows(all, (batch.length - 1) * batch.batch, batch.batch);
}

ad::Tensor SequenceEncoder::embed_inputs(const SequenceBatch& batch, const ForwardContext& ctx) const {
  if (batch.length == 0 || batch.batch == 0) throw InvalidArgument("encoder received an empty history");
  const std::size_t rows = batch.length * batch.batch;
  if (batch.features.rows() != rows || batch.features.cols() != config_.input_dim) {
    throw ShapeMismatch("encoder features must be [" + std::to_string(rows) + " x " +
                        std::to_string(config_.input_dim) + "], got " +
                        ad::shape_string(batch.features.shape()));
  }
  if (batch.time_embedding.rows() != rows || batch.time_embedding.cols() != config_.hidden_dim) {
    throw ShapeMismatch("encoder time embedding has the wrong shape");
  }
  ad::Tensor x = ad::add(input_projection_.forward(batch.features), batch.time_embedding);
  return dropout(x, config_.dropout, ctx);
}

RecurrentEncoder::RecurrentEncoder(EncoderConfig config, std::mt19937_64& rng)
    : SequenceEncoder(std::move(config)) {
  config_.validate();
  const std::size_t h = config_.hidden_dim;
  input_projection_ = Linear(config_.input_dim, h, rng, "encoder.input");
  for (std::size_t l = 0; l < config_.layers; ++l) {
    cells_.emplace_back(h, h, rng, "encoder.gru" + std::to_string(l));
  }
  output_ = Linear(h, h, rng, "encoder.output");
}

ad::Tensor RecurrentEncoder::encode_all(const SequenceBatch& batch, const ForwardContext& ctx) const {
  ad::Tensor x = embed_inputs(batch, ctx);
  const std::size_t b = batch.batch;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    if (l > 0) x = dropout(x, config_.dropout, ctx);
    ad::Tensor projected = cells_[l].project_inputs(x);
    ad::Tensor state = ad::Tensor::zeros({b, config_.hidden_dim});
    std::vector<ad::Tensor> states;
    states.reserve(batch.length);
    for (std::size_t t = 0; t < batch.length; ++t) {
      state = cells_[l].step(ad::slice_rows(projected, t * b, b), state);
      states.push_back(state);
    }
    x = ad::concat_rows(states);
  }
  return output_.forward(x);
}

ad::ParameterList RecurrentEncoder::parameters() const {
  ad::ParameterList out = input_projection_.parameters();
  for (const auto& c : cells_) append(out, c.parameters());
  append(out, output_.parameters());
  return out;
}

AttentionEncoder::AttentionEncoder(EncoderConfig config, std::mt19937_64& rng)
    : SequenceEncoder(std::move(config)) {
  config_.validate();
  const std::size_t h = config_.hidden_dim;
  input_projection_ = Linear(config_.input_dim, h, rng, "encoder.input");
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "encoder.block" + std::to_string(l);
    blocks_.push_back(Block{Linear(h, h, rng, p + ".query"), Linear(h, h, rng, p + ".key"),
                            Linear(h, h, rng, p + ".value"), Linear(h, h, rng, p + ".mix"),
                            Linear(h, 2 * h, rng, p + ".expand"), Linear(2 * h, h, rng, p + ".contract")});
  }
  output_ = Linear(h, h, rng, "encoder.output");
}

ad::Tensor AttentionEncoder::run_sequence(const ad::Tensor& input, const ForwardContext& ctx) const {
  const std::size_t len = input.rows();
  const std::size_t heads = config_.heads;
  const std::size_t width = config_.hidden_dim / heads;
  std::vector<double> mask(len * len, 0.0);
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = i + 1; j < len; ++j) mask[i * len + j] = -1e30;
  const ad::Tensor causal = ad::Tensor::matrix(len, len, std::move(mask));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(width));

  ad::Tensor x = input;
  for (const Block& block : blocks_) {
    ad::Tensor q = block.query.forward(x);
    ad::Tensor k = block.key.forward(x);
    ad::Tensor v = block.value.forward(x);
    std::vector<ad::Tensor> outputs;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      ad::Tensor qh = ad::slice_cols(q, hd * width, width);
      ad::Tensor kh = ad::slice_cols(k, hd * width, width);
      ad::Tensor vh = ad::slice_cols(v, hd * width, width);
      ad::Tensor scores = ad::add(ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt), causal);
      outputs.push_back(ad::matmul(ad::softmax_rows(scores), vh));
    }
    ad::Tensor attended = block.mix.forward(ad::concat_cols(outputs));
    x = ad::add(x, dropout(attended, config_.dropout, ctx));
    ad::Tensor ff = block.contract.forward(ad::gelu(block.expand.forward(x)));
    x = ad::add(x, dropout(ff, config_.dropout, ctx));
  }
  return x;
}

ad::Tensor AttentionEncoder::encode_all(const SequenceBatch& batch, const ForwardContext& ctx) const {
  ad::Tensor x = embed_inputs(batch, ctx);
  const std::size_t len = batch.length;
  const std::size_t b = batch.batch;
  std::vector<ad::Tensor> per_sequence;
  per_sequence.reserve(b);
  for (std::size_t s = 0; s < b; ++s) {
    std::vector<std::size_t> rows(len);
    for (std::size_t t = 0; t < len; ++t) rows[t] = t * b + s;
    per_sequence.push_back(run_sequence(ad::gather_rows(x, rows), ctx));
  }
  // Back to time-major order.
  ad::Tensor stacked = ad::concat_rows(per_sequence);
  std::vector<std::size_t> order(len * b);
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t s = 0; s < b; ++s) order[t * b + s] = s * len + t;
  return output_.forward(ad::gather_rows(stacked, order));
}

ad::ParameterList AttentionEncoder::parameters() const {
  ad::ParameterList out = input_projection_.parameters();
  for (const auto& blk : blocks_) {
    for (const Linear* l : {&blk.query, &blk.key, &blk.value, &blk.mix, &blk.expand, &blk.contract}) {
      append(out, l->parameters());
    }
  }
  append(out, output_.parameters());
  return out;
}

std::unique_ptr<SequenceEncoder> make_encoder(const EncoderConfig& config, std::mt19937_64& rng) {
  if (config.kind == EncoderKind::recurrent) return std::make_unique<RecurrentEncoder>(config, rng);
  return std::make_unique<AttentionEncoder>(config, rng);
}

}  // namespace clef
