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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "persona/core_math.hpp"

namespace persona {

struct ActivationLabel {
  enum class Kind { kTrait, kNeutral };
  Kind kind = Kind::kNeutral;
  std::string name;  // empty for neutral

  static ActivationLabel trait(std::string n) { return {Kind::kTrait, std::move(n)}; }
  static ActivationLabel neutral() { return {Kind::kNeutral, {}}; }
  bool is_trait() const noexcept { return kind == Kind::kTrait; }
  friend bool operator==(const ActivationLabel&, const ActivationLabel&) = default;
};

// One activation vector per prompt, all captured at the same layer.
class ActivationSet {
 public:
  // Validates: at least one row, rows == prompt_ids.size(), all finite.
  ActivationSet(std::uint32_t layer_index, ActivationLabel label,
                std::vector<std::string> prompt_ids, Matrix rows);

  std::uint32_t layer_index() const noexcept { return layer_; }
  std::size_t d_model() const noexcept { return rows_.cols(); }
  std::size_t size() const noexcept { return rows_.rows(); }
  const ActivationLabel& label() const noexcept { return label_; }
  const std::vector<std::string>& prompt_ids() const noexcept { return prompt_ids_; }
  const Matrix& rows() const noexcept { return rows_; }

  friend bool operator==(const ActivationSet&, const ActivationSet&) = default;

 private:
  std::uint32_t layer_;
  ActivationLabel label_;
  std::vector<std::string> prompt_ids_;
  Matrix rows_;
};

// ---- framed binary files -------------------------------------------------
//
// Layout shared by activation dumps, direction libraries and toy-model
// weights:
//   [0,5)   magic (5 ASCII bytes)
//   [5]     version
//   [6,8)   reserved, zero
//   [8,12)  u32 LE header length H
//   [12,12+H) UTF-8 JSON header
//   rest    little-endian f32 payload

struct FramedFile {
  nlohmann::json header;
  std::vector<float> payload;
};

inline constexpr std::uint8_t kFormatVersion = 1;

std::vector<std::uint8_t> encode_framed(std::string_view magic, const nlohmann::json& header,
                                        std::span<const float> payload);
FramedFile decode_framed(std::string_view magic, std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// ---- ACTV1 dumps -----------------------------------------------------------

inline constexpr std::string_view kDumpMagic = "ACTV1";

std::vector<std::uint8_t> encode_dump(const ActivationSet& set);
ActivationSet decode_dump(std::span<const std::uint8_t> bytes);
void write_dump(const ActivationSet& set, const std::filesystem::path& path);
ActivationSet read_dump(const std::filesystem::path& path);

// ---- lexicon ---------------------------------------------------------------

struct TraitEntry {
  std::string name;
  std::string trait_system_prompt;
  std::string neutral_reference;
  friend bool operator==(const TraitEntry&, const TraitEntry&) = default;
};

struct PersonaLexicon {
  std::vector<TraitEntry> traits;

  std::size_t size() const noexcept { return traits.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::vector<std::string> names() const;
};

// Lower-cases names and rejects empty lists and duplicates.
PersonaLexicon parse_lexicon(const nlohmann::json& j);
PersonaLexicon load_lexicon(const std::filesystem::path& path);
nlohmann::json lexicon_to_json(const PersonaLexicon& lexicon);

// The 179-trait default lexicon.
const PersonaLexicon& bundled_lexicon();

// Reference grouping of the bundled traits into 20 groups (1-based group id
// per bundled trait, same order). Illustrative metadata only.
const std::vector<int>& bundled_reference_groups();

// ---- synthetic activations -------------------------------------------------

struct SyntheticSpec {
  std::size_t d_model = 4096;
  std::size_t n_traits = 179;
  std::size_t n_prompts_per_trait = 16;
  std::size_t n_clusters = 20;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  std::uint32_t layer_index = 18;
  // Optional trait names; when empty, names are "synthetic_000", ...
  std::vector<std::string> trait_names;

  void validate() const;
};

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);

struct SyntheticGroundTruth {
  std::vector<std::string> trait_names;
  std::vector<Vector> planted_directions;  // unit, one per trait
  std::vector<int> cluster_of;             // per trait
  std::vector<double> scales;              // s_t per trait
};

struct SyntheticData {
  std::vector<ActivationSet> trait_sets;
  ActivationSet neutral_set;
  SyntheticGroundTruth ground_truth;
};

// Trait t in cluster c: a_i = base_i + s_t (g_c + delta_t) + eps_i; neutral
// rows are base_i + eps'_i. Prompt ids are shared across every set.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

nlohmann::json ground_truth_to_json(const SyntheticGroundTruth& gt);

// Bundled entries where names match, generic prompts otherwise.
PersonaLexicon synthetic_lexicon(const SyntheticGroundTruth& gt);

// Writes <trait>.actv per trait, neutral.actv, ground_truth.json and
// lexicon.json into `dir`.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

// File name used for a trait's dump inside a dump directory.
std::string dump_file_name(std::string_view trait_name);
inline constexpr std::string_view kNeutralDumpName = "neutral.actv";

}  // namespace persona
