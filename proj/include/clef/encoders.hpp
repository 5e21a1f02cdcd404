#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "clef/autodiff/tensor.hpp"
#include "clef/layers.hpp"

namespace clef {

enum class EncoderKind { recurrent, attention };

std::string to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(const std::string& text);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::recurrent;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t layers = 4;
  std::size_t heads = 4;
  double dropout = 0.6;

  void validate() const;
};

/// A batch of equally long, time-major sequences: row t*batch + b holds step t
/// of sequence b. Shorter sequences are padded at the end; the encoders are
/// causal, so padding never reaches an earlier step.
struct SequenceBatch {
  std::size_t length = 0;
  std::size_t batch = 0;
  ad::Tensor features;        // [length*batch x input_dim]
  ad::Tensor time_embedding;  // [length*batch x hidden_dim]
};

/// Sequence encoder F. `encode_all` returns the state after every prefix, in
/// the same time-major layout as the input.
class SequenceEncoder {
 public:
  explicit SequenceEncoder(EncoderConfig config) : config_(std::move(config)) {}
  virtual ~SequenceEncoder() = default;

  virtual ad::Tensor encode_all(const SequenceBatch& batch, const ForwardContext& ctx) const = 0;
  /// State after the final step of each sequence, [batch x hidden_dim].
  ad::Tensor encode(const SequenceBatch& batch, const ForwardContext& ctx) const;
  virtual ad::ParameterList parameters() const = 0;

  const EncoderConfig& config() const { return config_; }
  Linear& output_layer() { return output_; }

 protected:
  /// Checks the batch and returns projected inputs plus time embeddings.
  ad::Tensor embed_inputs(const SequenceBatch& batch, const ForwardContext& ctx) const;

  EncoderConfig config_;
  Linear input_projection_;
  Linear output_;
};

class RecurrentEncoder final : public SequenceEncoder {
 public:
  RecurrentEncoder(EncoderConfig config, std::mt19937_64& rng);
  ad::Tensor encode_all(const SequenceBatch& batch, const ForwardContext& ctx) const override;
  ad::ParameterList parameters() const override;

 private:
  std::vector<GruCell> cells_;
};

/// Causal multi-head self-attention blocks with residual connections and GELU
/// feed-forward sublayers.
class AttentionEncoder final : public SequenceEncoder {
 public:
  AttentionEncoder(EncoderConfig config, std::mt19937_64& rng);
  ad::Tensor encode_all(const SequenceBatch& batch, const ForwardContext& ctx) const override;
  ad::ParameterList parameters() const override;

 private:
  struct Block {
    Linear query, key, value, mix, expand, contract;
  };
  ad::Tensor run_sequence(const ad::Tensor& x, const ForwardContext& ctx) const;

  std::vector<Block> blocks_;
};

std::unique_ptr<SequenceEncoder> make_encoder(const EncoderConfig& config, std::mt19937_64& rng);

}  // namespace clef
