// Copyright 2026 The persona-steer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "persona/core_math.hpp"

namespace persona {

struct ToyModelConfig {
  std::size_t vocab_size = 256;
  std::size_t d_model = 64;
  std::size_t n_layers = 8;
  std::size_t n_heads = 4;
  std::size_t d_mlp = 256;
  std::size_t max_seq = 128;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const ToyModelConfig&, const ToyModelConfig&) = default;
};

nlohmann::json config_to_json(const ToyModelConfig& c);
ToyModelConfig config_from_json(const nlohmann::json& j);

// A matrix whose output is added to the residual stream.
struct ResidualWriterId {
  enum class Kind { kTokenEmbedding, kPositionalEmbedding, kAttentionOutput, kMlpOutput };
  Kind kind;
  std::size_t layer = 0;  // meaningful for attention/MLP outputs only

  std::string name() const;
  friend bool operator==(const ResidualWriterId&, const ResidualWriterId&) = default;
};

struct CaptureRecord {
  std::size_t layer_index = 0;
  std::string position_policy = "last_token";
  Matrix vectors;  // batch x d_model
};

// Called on resid_l (the stream entering block l, or the final stream for
// l == n_layers) at one position. Modifications are seen by all later layers.
using ResidualHook =
    std::function<void(std::size_t layer, std::size_t position, std::span<double> resid)>;

struct ForwardOptions {
  std::set<std::size_t> capture_layers;
  ResidualHook hook;
  // Full per-layer residual streams (seq x d each, n_layers + 1 of them).
  bool record_residuals = false;
  // Per-writer contributions: embeddings plus each block's attention and MLP
  // outputs (seq x d each).
  bool record_contributions = false;
};

struct ForwardResult {
  Matrix logits;  // seq x vocab
  std::vector<CaptureRecord> captures;
  std::vector<Matrix> residuals;
  Matrix token_embedding_out;
  Matrix positional_embedding_out;
  std::vector<Matrix> attention_out;
  std::vector<Matrix> mlp_out;
};

struct Generation {
  std::vector<int> tokens;  // continuation only
  // Captures of the final forward pass for each generated token.
  std::vector<std::vector<CaptureRecord>> step_captures;
};

struct WriterRef {
  ResidualWriterId id;
  std::reference_wrapper<Matrix> matrix;
};

struct ConstWriterRef {
  ResidualWriterId id;
  std::reference_wrapper<const Matrix> matrix;
};

// Decoder-only transformer. Writer matrices are stored (d_model x d_in),
// residual side first. RMS normalisation without gain, no biases.
class ToyModel {
 public:
  struct Layer {
    Matrix wq, wk, wv;  // d x d
    Matrix wo;          // d x d, writer
    Matrix w_up;        // d_mlp x d
    Matrix w_down;      // d x d_mlp, writer
  };

  static ToyModel init(const ToyModelConfig& config);

  const ToyModelConfig& config() const noexcept { return config_; }

  ForwardResult forward(std::span<const int> tokens, const ForwardOptions& options = {}) const;

  // Greedy decoding. `on_token` fires as each token is chosen.
  Generation generate(std::span<const int> prompt, std::size_t max_new,
                      const ResidualHook& hook = {},
                      const std::set<std::size_t>& capture_layers = {},
                      const std::function<void(int)>& on_token = {}) const;

  std::vector<WriterRef> writer_matrices();
  std::vector<ConstWriterRef> writer_matrices() const;

  // Every named tensor, writers and internals.
  std::vector<std::pair<std::string, const Matrix*>> named_tensors() const;

  const Matrix& token_embedding() const noexcept { return token_embedding_; }
  const Matrix& positional_embedding() const noexcept { return positional_embedding_; }
  const Matrix& unembedding() const noexcept { return unembedding_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  void save(const std::filesystem::path& path) const;
  static ToyModel load(const std::filesystem::path& path);

 private:
  ToyModelConfig config_;
  Matrix token_embedding_;       // d x vocab, writer
  Matrix positional_embedding_;  // d x max_seq, writer
  std::vector<Layer> layers_;
  Matrix unembedding_;  // vocab x d

  std::vector<std::pair<std::string, Matrix*>> mutable_tensors();
};

inline constexpr double kRmsNormEpsilon = 1e-6;
inline constexpr std::string_view kWeightsMagic = "TOYM1";

// Byte-level text codec for the toy vocabulary.
std::vector<int> encode_bytes(std::string_view text, std::size_t vocab_size);
// Printable ASCII passes through; every other token becomes '.'.
std::string decode_tokens(std::span<const int> tokens);

}  // namespace persona
