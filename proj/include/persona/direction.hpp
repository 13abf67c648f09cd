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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "persona/activation_io.hpp"
#include "persona/core_math.hpp"

namespace persona {

enum class DirectionMethod { kDiffOfMeans, kPairedMeanDiff };

std::string to_string(DirectionMethod m);
DirectionMethod direction_method_from_string(std::string_view s);

struct PersonaDirection {
  std::string trait_name;
  std::uint32_t layer_index = 0;
  Vector r_raw;          // unnormalised difference, activation units
  Vector r_hat;          // unit form of r_raw
  double mu_t = 0.0;     // mean projection of trait rows onto r_hat
  std::size_t n_t = 0;
  std::size_t n_n = 0;
  DirectionMethod method = DirectionMethod::kDiffOfMeans;

  std::size_t d_model() const noexcept { return r_hat.size(); }
};

PersonaDirection diff_of_means(const ActivationSet& trait, const ActivationSet& neutral);

// Requires identical prompt ids in identical order; throws PairingError
// otherwise.
PersonaDirection paired_mean_diff(const ActivationSet& trait, const ActivationSet& neutral);

// Ordered trait -> direction map. Order is the lexicon order and is used for
// tie-breaking throughout the analytics.
class DirectionLibrary {
 public:
  DirectionLibrary() = default;
  explicit DirectionLibrary(std::vector<PersonaDirection> directions);

  std::size_t size() const noexcept { return directions_.size(); }
  bool empty() const noexcept { return directions_.empty(); }
  std::size_t d_model() const noexcept;
  std::uint32_t layer_index() const noexcept;

  const std::vector<PersonaDirection>& directions() const noexcept { return directions_; }
  const PersonaDirection& at(std::size_t i) const { return directions_.at(i); }
  // Throws MissingDataError for unknown traits.
  const PersonaDirection& at(std::string_view trait) const;
  std::optional<std::size_t> index_of(std::string_view trait) const;
  std::vector<std::string> names() const;

  // n x d matrix of r_raw rows.
  Matrix raw_matrix() const;

  // FNV-1a over the serialised library; keys analytics caches.
  std::uint64_t content_hash() const;

 private:
  std::vector<PersonaDirection> directions_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Every lexicon trait needs <dump_file_name(trait)> in `dump_dir` plus the
// shared neutral.actv; throws MissingDataError naming the first missing trait.
DirectionLibrary extract_all(const PersonaLexicon& lexicon, const std::filesystem::path& dump_dir,
                             DirectionMethod method);

// In-memory variant: `trait_sets` is matched to the lexicon by label name.
DirectionLibrary extract_all(const PersonaLexicon& lexicon,
                             const std::vector<ActivationSet>& trait_sets,
                             const ActivationSet& neutral, DirectionMethod method);

// PDIR1 framing: JSON index {trait, layer, n_t, n_n, mu_t, method} per entry,
// f32 payload of r_raw rows.
inline constexpr std::string_view kLibraryMagic = "PDIR1";
inline constexpr std::string_view kLibraryFileName = "directions.pdir";

std::vector<std::uint8_t> encode_library(const DirectionLibrary& lib);
DirectionLibrary decode_library(std::span<const std::uint8_t> bytes);
// `dir` is a library directory holding directions.pdir.
void save_library(const DirectionLibrary& lib, const std::filesystem::path& dir);
DirectionLibrary load_library(const std::filesystem::path& dir);

}  // namespace persona
