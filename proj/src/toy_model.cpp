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

#include "persona/toy_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "persona/activation_io.hpp"
#include "persona/errors.hpp"
#include "persona/rng.hpp"

namespace persona {

using nlohmann::json;

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;

ConstMap view(const Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

Matrix to_matrix(const RowMajor& e) {
  Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  std::copy(e.data(), e.data() + e.size(), m.data().begin());
  return m;
}

Matrix gaussian(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.normal(0.0, 0.02);
  return m;
}

RowMajor rms_norm(const RowMajor& x) {
  RowMajor out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double ms = x.row(r).squaredNorm() / static_cast<double>(x.cols());
    out.row(r) = x.row(r) / std::sqrt(ms + kRmsNormEpsilon);
  }
  return out;
}

double gelu(double x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

}  // namespace

void ToyModelConfig::validate() const {
  if (vocab_size == 0 || d_model == 0 || n_layers == 0 || n_heads == 0 || d_mlp == 0 ||
      max_seq == 0) {
    throw ConfigError("toy model sizes must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                      std::to_string(n_heads));
  }
}

json config_to_json(const ToyModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model}, {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},       {"d_mlp", c.d_mlp},     {"max_seq", c.max_seq},
          {"seed", c.seed}};
}

ToyModelConfig config_from_json(const json& j) {
  ToyModelConfig c;
  try {
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.d_model = j.value("d_model", c.d_model);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.d_mlp = j.value("d_mlp", c.d_mlp);
    c.max_seq = j.value("max_seq", c.max_seq);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("toy model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string ResidualWriterId::name() const {
  switch (kind) {
    case Kind::kTokenEmbedding:
      return "token_embedding";
    case Kind::kPositionalEmbedding:
      return "positional_embedding";
    case Kind::kAttentionOutput:
      return "layers." + std::to_string(layer) + ".attn_out";
    case Kind::kMlpOutput:
      return "layers." + std::to_string(layer) + ".mlp_out";
  }
  return {};
}

ToyModel ToyModel::init(const ToyModelConfig& config) {
  config.validate();
  ToyModel m;
  m.config_ = config;
  Rng rng(config.seed);
  const std::size_t d = config.d_model;
  m.token_embedding_ = gaussian(rng, d, config.vocab_size);
  m.positional_embedding_ = gaussian(rng, d, config.max_seq);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    Layer layer;
    layer.wq = gaussian(rng, d, d);
    layer.wk = gaussian(rng, d, d);
    layer.wv = gaussian(rng, d, d);
    layer.wo = gaussian(rng, d, d);
    layer.w_up = gaussian(rng, config.d_mlp, d);
    layer.w_down = gaussian(rng, d, config.d_mlp);
    m.layers_.push_back(std::move(layer));
  }
  m.unembedding_ = gaussian(rng, config.vocab_size, d);
  return m;
}

ForwardResult ToyModel::forward(std::span<const int> tokens, const ForwardOptions& options) const {
  const std::size_t seq = tokens.size();
  const std::size_t d = config_.d_model;
  const std::size_t n_layers = config_.n_layers;
  if (seq == 0) throw InputError("forward requires at least one token");
  if (seq > config_.max_seq) {
    throw InputError("sequence length " + std::to_string(seq) + " exceeds max_seq " +
                     std::to_string(config_.max_seq));
  }
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= config_.vocab_size) {
      throw InputError("token " + std::to_string(t) + " outside vocabulary");
    }
  }
  for (std::size_t l : options.capture_layers) {
    if (l > n_layers) throw InputError("capture layer " + std::to_string(l) + " out of range");
  }

  ForwardResult result;
  RowMajor tok_out(seq, d), pos_out(seq, d);
  const ConstMap emb = view(token_embedding_);
  const ConstMap pos = view(positional_embedding_);
  for (std::size_t p = 0; p < seq; ++p) {
    tok_out.row(p) = emb.col(tokens[p]).transpose();
    pos_out.row(p) = pos.col(static_cast<Eigen::Index>(p)).transpose();
  }
  RowMajor resid = tok_out + pos_out;
  if (options.record_contributions) {
    result.token_embedding_out = to_matrix(tok_out);
    result.positional_embedding_out = to_matrix(pos_out);
  }

  auto visit_layer = [&](std::size_t l) {
    if (options.hook) {
      for (std::size_t p = 0; p < seq; ++p) {
        options.hook(l, p, std::span<double>(resid.row(p).data(), d));
      }
    }
    if (options.capture_layers.contains(l)) {
      CaptureRecord rec;
      rec.layer_index = l;
      rec.vectors = Matrix(1, d);
      for (std::size_t i = 0; i < d; ++i) rec.vectors(0, i) = resid(seq - 1, i);
      result.captures.push_back(std::move(rec));
    }
    if (options.record_residuals) result.residuals.push_back(to_matrix(resid));
  };

  const std::size_t n_heads = config_.n_heads;
  const std::size_t hd = d / n_heads;
  const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));

  for (std::size_t l = 0; l < n_layers; ++l) {
    visit_layer(l);
    const Layer& w = layers_[l];

    const RowMajor h = rms_norm(resid);
    const RowMajor q = h * view(w.wq).transpose();
    const RowMajor k = h * view(w.wk).transpose();
    const RowMajor v = h * view(w.wv).transpose();
    RowMajor heads = RowMajor::Zero(seq, d);
    Eigen::VectorXd scores(seq);
    for (std::size_t head = 0; head < n_heads; ++head) {
      const auto off = static_cast<Eigen::Index>(head * hd);
      const auto width = static_cast<Eigen::Index>(hd);
      for (std::size_t i = 0; i < seq; ++i) {
        const auto qi = q.row(i).segment(off, width);
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          scores[j] = qi.dot(k.row(j).segment(off, width)) * inv_sqrt_hd;
          max_score = std::max(max_score, scores[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          scores[j] = std::exp(scores[j] - max_score);
          total += scores[j];
        }
        for (std::size_t j = 0; j <= i; ++j) {
          heads.row(i).segment(off, width) += (scores[j] / total) * v.row(j).segment(off, width);
        }
      }
    }
    const RowMajor attn = heads * view(w.wo).transpose();
    resid += attn;

    const RowMajor h2 = rms_norm(resid);
    RowMajor up = h2 * view(w.w_up).transpose();
    up = up.unaryExpr([](double x) { return gelu(x); });
    const RowMajor mlp = up * view(w.w_down).transpose();
    resid += mlp;

    if (options.record_contributions) {
      result.attention_out.push_back(to_matrix(attn));
      result.mlp_out.push_back(to_matrix(mlp));
    }
  }
  visit_layer(n_layers);

  const RowMajor final_h = rms_norm(resid);
  result.logits = to_matrix(final_h * view(unembedding_).transpose());
  return result;
}

Generation ToyModel::generate(std::span<const int> prompt, std::size_t max_new,
                              const ResidualHook& hook,
                              const std::set<std::size_t>& capture_layers,
                              const std::function<void(int)>& on_token) const {
  Generation out;
  if (max_new == 0) return out;
  std::vector<int> seq(prompt.begin(), prompt.end());
  ForwardOptions options;
  options.hook = hook;
  options.capture_layers = capture_layers;
  for (std::size_t step = 0; step < max_new && seq.size() < config_.max_seq; ++step) {
    ForwardResult r = forward(seq, options);
    const auto last = r.logits.row(r.logits.rows() - 1);
    const auto best = std::max_element(last.begin(), last.end());
    const int token = static_cast<int>(best - last.begin());
    out.tokens.push_back(token);
    out.step_captures.push_back(std::move(r.captures));
    seq.push_back(token);
    if (on_token) on_token(token);
  }
  return out;
}

std::vector<WriterRef> ToyModel::writer_matrices() {
  using K = ResidualWriterId::Kind;
  std::vector<WriterRef> out;
  out.push_back({{K::kTokenEmbedding, 0}, token_embedding_});
  out.push_back({{K::kPositionalEmbedding, 0}, positional_embedding_});
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    out.push_back({{K::kAttentionOutput, l}, layers_[l].wo});
    out.push_back({{K::kMlpOutput, l}, layers_[l].w_down});
  }
  return out;
}

std::vector<ConstWriterRef> ToyModel::writer_matrices() const {
  std::vector<ConstWriterRef> out;
  for (const auto& w : const_cast<ToyModel*>(this)->writer_matrices()) {
    out.push_back({w.id, w.matrix.get()});
  }
  return out;
}

std::vector<std::pair<std::string, Matrix*>> ToyModel::mutable_tensors() {
  std::vector<std::pair<std::string, Matrix*>> out;
  out.emplace_back("token_embedding", &token_embedding_);
  out.emplace_back("positional_embedding", &positional_embedding_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    out.emplace_back(p + "attn_q", &layers_[l].wq);
    out.emplace_back(p + "attn_k", &layers_[l].wk);
    out.emplace_back(p + "attn_v", &layers_[l].wv);
    out.emplace_back(p + "attn_out", &layers_[l].wo);
    out.emplace_back(p + "mlp_up", &layers_[l].w_up);
    out.emplace_back(p + "mlp_out", &layers_[l].w_down);
  }
  out.emplace_back("unembed", &unembedding_);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ToyModel::named_tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, m] : const_cast<ToyModel*>(this)->mutable_tensors()) out.emplace_back(name, m);
  return out;
}

void ToyModel::save(const std::filesystem::path& path) const {
  json tensors = json::array();
  std::vector<float> payload;
  for (const auto& [name, m] : named_tensors()) {
    tensors.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
    payload.insert(payload.end(), m->data().begin(), m->data().end());
  }
  const json header = {{"config", config_to_json(config_)}, {"tensors", tensors}};
  write_file_bytes(path, encode_framed(kWeightsMagic, header, payload));
}

ToyModel ToyModel::load(const std::filesystem::path& path) {
  const FramedFile f = decode_framed(kWeightsMagic, read_file_bytes(path));
  ToyModel m;
  try {
    m.config_ = config_from_json(f.header.at("config"));
  } catch (const json::exception& e) {
    throw FormatError("header", e.what());
  }
  m.layers_.resize(m.config_.n_layers);
  std::size_t offset = 0;
  const auto& tensors = f.header.at("tensors");
  auto slots = m.mutable_tensors();
  if (tensors.size() != slots.size()) throw FormatError("header", "unexpected tensor count");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != slots[i].first) {
      throw FormatError("header", "unexpected tensor '" + t.at("name").get<std::string>() + "'");
    }
    const auto rows = t.at("rows").get<std::size_t>();
    const auto cols = t.at("cols").get<std::size_t>();
    if (offset + rows * cols > f.payload.size()) throw FormatError("length", "payload truncated");
    std::vector<double> values(f.payload.begin() + static_cast<std::ptrdiff_t>(offset),
                               f.payload.begin() + static_cast<std::ptrdiff_t>(offset + rows * cols));
    *slots[i].second = Matrix(rows, cols, std::move(values));
    offset += rows * cols;
  }
  if (offset != f.payload.size()) throw FormatError("length", "trailing payload");
  return m;
}

std::vector<int> encode_bytes(std::string_view text, std::size_t vocab_size) {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) {
    out.push_back(static_cast<int>(static_cast<unsigned char>(c) % vocab_size));
  }
  return out;
}

std::string decode_tokens(std::span<const int> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (int t : tokens) out.push_back(t >= 32 && t <= 126 ? static_cast<char>(t) : '.');
  return out;
}

}  // namespace persona
