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

#include "persona/activation_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "persona/errors.hpp"
#include "persona/rng.hpp"

namespace persona {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "payload encoding assumes a little-endian host");

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

constexpr std::size_t kPreambleSize = 12;

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

ActivationSet::ActivationSet(std::uint32_t layer_index, ActivationLabel label,
                             std::vector<std::string> prompt_ids, Matrix rows)
    : layer_(layer_index),
      label_(std::move(label)),
      prompt_ids_(std::move(prompt_ids)),
      rows_(std::move(rows)) {
  if (rows_.rows() == 0 || rows_.cols() == 0) {
    throw InputError("activation set must have at least one row and one column");
  }
  if (prompt_ids_.size() != rows_.rows()) {
    throw InputError("activation set has " + std::to_string(rows_.rows()) + " rows but " +
                     std::to_string(prompt_ids_.size()) + " prompt ids");
  }
  if (!rows_.all_finite()) throw InputError("activation set contains non-finite values");
}

std::vector<std::uint8_t> encode_framed(std::string_view magic, const json& header,
                                        std::span<const float> payload) {
  if (magic.size() != 5) throw InputError("frame magic must be 5 bytes");
  const std::string text = header.dump();
  std::vector<std::uint8_t> out;
  out.reserve(kPreambleSize + text.size() + payload.size() * 4);
  out.insert(out.end(), magic.begin(), magic.end());
  out.push_back(kFormatVersion);
  out.push_back(0);
  out.push_back(0);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  const auto* raw = reinterpret_cast<const std::uint8_t*>(payload.data());
  out.insert(out.end(), raw, raw + payload.size_bytes());
  return out;
}

FramedFile decode_framed(std::string_view magic, std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), magic.data(), 5) != 0) {
    throw FormatError("magic", "expected '" + std::string(magic) + "'");
  }
  if (bytes.size() < kPreambleSize) throw FormatError("length", "truncated preamble");
  if (bytes[5] != kFormatVersion) {
    throw FormatError("version", "unsupported version " + std::to_string(bytes[5]));
  }
  const std::uint32_t header_len = get_u32(bytes, 8);
  if (bytes.size() < kPreambleSize + header_len) {
    throw FormatError("length", "header extends past end of file");
  }
  FramedFile out;
  try {
    out.header = json::parse(bytes.begin() + kPreambleSize,
                             bytes.begin() + kPreambleSize + header_len);
  } catch (const json::exception& e) {
    throw FormatError("header", e.what());
  }
  const std::size_t payload_bytes = bytes.size() - kPreambleSize - header_len;
  if (payload_bytes % 4 != 0) throw FormatError("length", "payload not a whole number of f32");
  out.payload.resize(payload_bytes / 4);
  std::memcpy(out.payload.data(), bytes.data() + kPreambleSize + header_len, payload_bytes);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_text_file(const fs::path& path, std::string_view text) {
  write_file_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string read_text_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

// ---- ACTV1 ---------------------------------------------------------------

std::vector<std::uint8_t> encode_dump(const ActivationSet& set) {
  json label = {{"kind", set.label().is_trait() ? "trait" : "neutral"}};
  if (set.label().is_trait()) label["name"] = set.label().name;
  const json header = {{"layer", set.layer_index()},
                       {"d_model", set.d_model()},
                       {"label", label},
                       {"prompt_ids", set.prompt_ids()}};
  const auto values = set.rows().data();
  std::vector<float> payload(values.begin(), values.end());
  return encode_framed(kDumpMagic, header, payload);
}

ActivationSet decode_dump(std::span<const std::uint8_t> bytes) {
  FramedFile f = decode_framed(kDumpMagic, bytes);
  std::uint32_t layer = 0;
  std::size_t d_model = 0;
  ActivationLabel label;
  std::vector<std::string> prompt_ids;
  try {
    layer = f.header.at("layer").get<std::uint32_t>();
    d_model = f.header.at("d_model").get<std::size_t>();
    const auto& l = f.header.at("label");
    const auto kind = l.at("kind").get<std::string>();
    if (kind == "trait") {
      label = ActivationLabel::trait(l.at("name").get<std::string>());
    } else if (kind == "neutral") {
      label = ActivationLabel::neutral();
    } else {
      throw FormatError("header", "unknown label kind '" + kind + "'");
    }
    prompt_ids = f.header.at("prompt_ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError("header", e.what());
  }
  if (d_model == 0 || prompt_ids.empty()) throw FormatError("header", "empty activation set");
  if (f.payload.size() != prompt_ids.size() * d_model) {
    throw FormatError("length", "payload has " + std::to_string(f.payload.size()) +
                                    " values, header implies " +
                                    std::to_string(prompt_ids.size() * d_model));
  }
  std::vector<double> values(f.payload.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(f.payload[i])) {
      throw FormatError("nonfinite", "payload value " + std::to_string(i));
    }
    values[i] = f.payload[i];
  }
  const std::size_t n_rows = values.size() / d_model;
  return ActivationSet(layer, std::move(label), std::move(prompt_ids),
                       Matrix(n_rows, d_model, std::move(values)));
}

void write_dump(const ActivationSet& set, const fs::path& path) {
  write_file_bytes(path, encode_dump(set));
}

ActivationSet read_dump(const fs::path& path) { return decode_dump(read_file_bytes(path)); }

// ---- lexicon ---------------------------------------------------------------

std::optional<std::size_t> PersonaLexicon::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < traits.size(); ++i)
    if (traits[i].name == name) return i;
  return std::nullopt;
}

std::vector<std::string> PersonaLexicon::names() const {
  std::vector<std::string> out;
  out.reserve(traits.size());
  for (const auto& t : traits) out.push_back(t.name);
  return out;
}

PersonaLexicon parse_lexicon(const json& j) {
  if (!j.is_array()) throw FormatError("header", "lexicon must be a JSON array");
  if (j.empty()) throw FormatError("empty", "lexicon has no traits");
  PersonaLexicon lex;
  std::set<std::string> seen;
  for (const auto& e : j) {
    TraitEntry t;
    try {
      t.name = to_lower(e.at("name").get<std::string>());
      t.trait_system_prompt = e.value("trait_system_prompt", std::string{});
      t.neutral_reference = e.value("neutral_reference", std::string{});
    } catch (const json::exception& ex) {
      throw FormatError("header", ex.what());
    }
    if (t.name.empty()) throw FormatError("header", "trait with empty name");
    if (!seen.insert(t.name).second) throw FormatError("duplicate", "trait '" + t.name + "'");
    lex.traits.push_back(std::move(t));
  }
  return lex;
}

PersonaLexicon load_lexicon(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError("header", e.what());
  }
  return parse_lexicon(j);
}

json lexicon_to_json(const PersonaLexicon& lexicon) {
  json out = json::array();
  for (const auto& t : lexicon.traits) {
    out.push_back({{"name", t.name},
                   {"trait_system_prompt", t.trait_system_prompt},
                   {"neutral_reference", t.neutral_reference}});
  }
  return out;
}

// ---- synthetic -------------------------------------------------------------

void SyntheticSpec::validate() const {
  if (d_model == 0 || n_traits == 0 || n_prompts_per_trait == 0 || n_clusters == 0) {
    throw ConfigError("synthetic spec sizes must be positive");
  }
  if (n_clusters > n_traits) throw ConfigError("n_clusters must not exceed n_traits");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise_sigma must be finite and non-negative");
  }
  if (!trait_names.empty() && trait_names.size() != n_traits) {
    throw ConfigError("trait_names must have n_traits entries");
  }
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  SyntheticSpec s;
  try {
    s.d_model = j.value("d_model", s.d_model);
    s.n_traits = j.value("n_traits", s.n_traits);
    s.n_prompts_per_trait = j.value("n_prompts_per_trait", s.n_prompts_per_trait);
    s.n_clusters = j.value("n_clusters", s.n_clusters);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.at("seed").get<std::uint64_t>();
    s.layer_index = j.value("layer", s.layer_index);
    if (j.contains("trait_names")) {
      if (j["trait_names"].is_string() && j["trait_names"] == "bundled") {
        auto names = bundled_lexicon().names();
        if (names.size() < s.n_traits) throw ConfigError("bundled lexicon too small");
        names.resize(s.n_traits);
        s.trait_names = std::move(names);
      } else {
        s.trait_names = j["trait_names"].get<std::vector<std::string>>();
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

json synthetic_spec_to_json(const SyntheticSpec& s) {
  json j = {{"d_model", s.d_model},
            {"n_traits", s.n_traits},
            {"n_prompts_per_trait", s.n_prompts_per_trait},
            {"n_clusters", s.n_clusters},
            {"noise_sigma", s.noise_sigma},
            {"seed", s.seed},
            {"layer", s.layer_index}};
  if (!s.trait_names.empty()) j["trait_names"] = s.trait_names;
  return j;
}

namespace {

Vector gaussian_vector(Rng& rng, std::size_t d, double stddev) {
  Vector v(d);
  for (double& x : v) x = rng.normal(0.0, stddev);
  return v;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t d = spec.d_model;
  const std::size_t n = spec.n_prompts_per_trait;
  Rng rng(spec.seed);

  std::vector<Vector> cluster_dirs;
  for (std::size_t c = 0; c < spec.n_clusters; ++c) {
    cluster_dirs.push_back(normalize(gaussian_vector(rng, d, 1.0)));
  }

  std::vector<int> cluster_of(spec.n_traits);
  for (std::size_t t = 0; t < spec.n_traits; ++t) {
    cluster_of[t] = static_cast<int>(t % spec.n_clusters);
  }
  rng.shuffle(cluster_of);

  // Per-trait offsets are small relative to the unit cluster direction so
  // that clusters stay separable but traits remain distinct.
  const double offset_scale = 0.25 / std::sqrt(static_cast<double>(d));
  SyntheticGroundTruth gt;
  std::vector<Vector> shifts;
  for (std::size_t t = 0; t < spec.n_traits; ++t) {
    Vector dir = cluster_dirs[static_cast<std::size_t>(cluster_of[t])];
    add_scaled(dir, 1.0, gaussian_vector(rng, d, offset_scale));
    const double scale = rng.uniform(2.5, 3.5);
    Vector shift = dir;
    for (double& x : shift) x *= scale;
    gt.planted_directions.push_back(normalize(dir));
    gt.scales.push_back(scale);
    shifts.push_back(std::move(shift));
  }
  gt.cluster_of = cluster_of;

  for (std::size_t t = 0; t < spec.n_traits; ++t) {
    if (spec.trait_names.empty()) {
      std::string name = std::to_string(t);
      name.insert(0, name.size() < 3 ? 3 - name.size() : 0, '0');
      gt.trait_names.push_back("synthetic_" + name);
    } else {
      gt.trait_names.push_back(to_lower(spec.trait_names[t]));
    }
  }

  std::vector<std::string> prompt_ids;
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = std::to_string(i);
    id.insert(0, id.size() < 4 ? 4 - id.size() : 0, '0');
    prompt_ids.push_back("p" + id);
  }

  Matrix base(n, d);
  for (double& x : base.data()) x = rng.normal();

  std::vector<ActivationSet> trait_sets;
  for (std::size_t t = 0; t < spec.n_traits; ++t) {
    Matrix rows = base;
    for (std::size_t i = 0; i < n; ++i) {
      add_scaled(rows.row(i), 1.0, shifts[t]);
      if (spec.noise_sigma > 0.0) {
        for (double& x : rows.row(i)) x += rng.normal(0.0, spec.noise_sigma);
      }
    }
    trait_sets.emplace_back(spec.layer_index, ActivationLabel::trait(gt.trait_names[t]),
                            prompt_ids, std::move(rows));
  }

  Matrix neutral_rows = base;
  if (spec.noise_sigma > 0.0) {
    for (double& x : neutral_rows.data()) x += rng.normal(0.0, spec.noise_sigma);
  }
  ActivationSet neutral(spec.layer_index, ActivationLabel::neutral(), prompt_ids,
                        std::move(neutral_rows));

  return SyntheticData{std::move(trait_sets), std::move(neutral), std::move(gt)};
}

json ground_truth_to_json(const SyntheticGroundTruth& gt) {
  json traits = json::array();
  for (std::size_t t = 0; t < gt.trait_names.size(); ++t) {
    traits.push_back({{"name", gt.trait_names[t]},
                      {"cluster", gt.cluster_of[t]},
                      {"scale", gt.scales[t]},
                      {"direction", gt.planted_directions[t]}});
  }
  return {{"traits", traits}};
}

std::string dump_file_name(std::string_view trait_name) {
  std::string out;
  for (char c : trait_name) {
    const auto u = static_cast<unsigned char>(c);
    out.push_back(std::isalnum(u) || c == '-' ? static_cast<char>(std::tolower(u)) : '_');
  }
  return out + ".actv";
}

PersonaLexicon synthetic_lexicon(const SyntheticGroundTruth& gt) {
  PersonaLexicon lex;
  const auto& bundled = bundled_lexicon();
  for (const auto& name : gt.trait_names) {
    if (auto idx = bundled.index_of(name)) {
      lex.traits.push_back(bundled.traits[*idx]);
    } else {
      lex.traits.push_back({name, "You are " + name + ".", "You are an assistant."});
    }
  }
  return lex;
}

void write_synthetic(const SyntheticData& data, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  for (const auto& set : data.trait_sets) {
    write_dump(set, dir / dump_file_name(set.label().name));
  }
  write_dump(data.neutral_set, dir / kNeutralDumpName);
  write_text_file(dir / "ground_truth.json", ground_truth_to_json(data.ground_truth).dump(2));

  write_text_file(dir / "lexicon.json", lexicon_to_json(synthetic_lexicon(data.ground_truth)).dump(2));
}

}  // namespace persona
