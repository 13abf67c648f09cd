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

#include "persona/direction.hpp"

#include <cmath>

#include "persona/errors.hpp"

namespace persona {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(DirectionMethod m) {
  return m == DirectionMethod::kDiffOfMeans ? "diff_of_means" : "paired_mean_diff";
}

DirectionMethod direction_method_from_string(std::string_view s) {
  if (s == "diff_of_means" || s == "diff") return DirectionMethod::kDiffOfMeans;
  if (s == "paired_mean_diff" || s == "paired") return DirectionMethod::kPairedMeanDiff;
  throw ConfigError("unknown direction method '" + std::string(s) + "'");
}

namespace {

void check_compatible(const ActivationSet& trait, const ActivationSet& neutral) {
  if (trait.d_model() != neutral.d_model()) {
    throw DimensionError("trait d_model " + std::to_string(trait.d_model()) +
                         " vs neutral d_model " + std::to_string(neutral.d_model()));
  }
  if (trait.layer_index() != neutral.layer_index()) {
    throw DimensionError("trait and neutral sets captured at different layers");
  }
}

std::string trait_name_of(const ActivationSet& set) {
  return set.label().is_trait() ? set.label().name : std::string("neutral");
}

PersonaDirection finish(const ActivationSet& trait, const ActivationSet& neutral, Vector r_raw,
                        DirectionMethod method) {
  PersonaDirection dir;
  dir.trait_name = trait_name_of(trait);
  dir.layer_index = trait.layer_index();
  dir.n_t = trait.size();
  dir.n_n = neutral.size();
  dir.method = method;
  try {
    dir.r_hat = normalize(r_raw);
  } catch (const DegenerateDirectionError&) {
    throw DegenerateDirectionError("trait '" + dir.trait_name +
                                   "' is indistinguishable from neutral activations");
  }
  dir.r_raw = std::move(r_raw);
  CompensatedSum acc;
  for (std::size_t i = 0; i < trait.size(); ++i) acc.add(dot(trait.rows().row(i), dir.r_hat));
  dir.mu_t = acc.value() / static_cast<double>(trait.size());
  return dir;
}

}  // namespace

PersonaDirection diff_of_means(const ActivationSet& trait, const ActivationSet& neutral) {
  check_compatible(trait, neutral);
  Vector r = mean_rows(trait.rows());
  add_scaled(r, -1.0, mean_rows(neutral.rows()));
  return finish(trait, neutral, std::move(r), DirectionMethod::kDiffOfMeans);
}

PersonaDirection paired_mean_diff(const ActivationSet& trait, const ActivationSet& neutral) {
  check_compatible(trait, neutral);
  if (trait.prompt_ids() != neutral.prompt_ids()) {
    throw PairingError("trait '" + trait_name_of(trait) +
                       "' prompt ids do not match the neutral set in order");
  }
  const std::size_t n = trait.size();
  const std::size_t d = trait.d_model();
  Vector r(d);
  for (std::size_t c = 0; c < d; ++c) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < n; ++i) acc.add(trait.rows()(i, c) - neutral.rows()(i, c));
    r[c] = acc.value() / static_cast<double>(n);
  }
  return finish(trait, neutral, std::move(r), DirectionMethod::kPairedMeanDiff);
}

// ---- library ---------------------------------------------------------------

DirectionLibrary::DirectionLibrary(std::vector<PersonaDirection> directions)
    : directions_(std::move(directions)) {
  for (std::size_t i = 0; i < directions_.size(); ++i) {
    const auto& d = directions_[i];
    if (d.d_model() != directions_.front().d_model()) {
      throw DimensionError("library mixes d_model values");
    }
    if (d.layer_index != directions_.front().layer_index) {
      throw DimensionError("library mixes layers");
    }
    if (!index_.emplace(d.trait_name, i).second) {
      throw FormatError("duplicate", "trait '" + d.trait_name + "' appears twice in library");
    }
  }
}

std::size_t DirectionLibrary::d_model() const noexcept {
  return directions_.empty() ? 0 : directions_.front().d_model();
}

std::uint32_t DirectionLibrary::layer_index() const noexcept {
  return directions_.empty() ? 0 : directions_.front().layer_index;
}

const PersonaDirection& DirectionLibrary::at(std::string_view trait) const {
  auto it = index_.find(trait);
  if (it == index_.end()) throw MissingDataError(std::string(trait));
  return directions_[it->second];
}

std::optional<std::size_t> DirectionLibrary::index_of(std::string_view trait) const {
  auto it = index_.find(trait);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> DirectionLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& d : directions_) out.push_back(d.trait_name);
  return out;
}

Matrix DirectionLibrary::raw_matrix() const {
  std::vector<Vector> rows;
  for (const auto& d : directions_) rows.push_back(d.r_raw);
  return Matrix::from_rows(rows);
}

std::uint64_t DirectionLibrary::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : encode_library(*this)) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

DirectionLibrary extract_all(const PersonaLexicon& lexicon,
                             const std::vector<ActivationSet>& trait_sets,
                             const ActivationSet& neutral, DirectionMethod method) {
  std::vector<PersonaDirection> out;
  for (const auto& entry : lexicon.traits) {
    const ActivationSet* match = nullptr;
    for (const auto& s : trait_sets) {
      if (s.label().is_trait() && s.label().name == entry.name) match = &s;
    }
    if (match == nullptr) throw MissingDataError(entry.name);
    out.push_back(method == DirectionMethod::kDiffOfMeans ? diff_of_means(*match, neutral)
                                                          : paired_mean_diff(*match, neutral));
    out.back().trait_name = entry.name;
  }
  return DirectionLibrary(std::move(out));
}

DirectionLibrary extract_all(const PersonaLexicon& lexicon, const fs::path& dump_dir,
                             DirectionMethod method) {
  for (const auto& entry : lexicon.traits) {
    if (!fs::exists(dump_dir / dump_file_name(entry.name))) throw MissingDataError(entry.name);
  }
  if (!fs::exists(dump_dir / kNeutralDumpName)) throw MissingDataError("neutral");
  const ActivationSet neutral = read_dump(dump_dir / kNeutralDumpName);
  std::vector<PersonaDirection> out;
  for (const auto& entry : lexicon.traits) {
    const ActivationSet trait = read_dump(dump_dir / dump_file_name(entry.name));
    out.push_back(method == DirectionMethod::kDiffOfMeans ? diff_of_means(trait, neutral)
                                                          : paired_mean_diff(trait, neutral));
    out.back().trait_name = entry.name;
  }
  return DirectionLibrary(std::move(out));
}

std::vector<std::uint8_t> encode_library(const DirectionLibrary& lib) {
  json index = json::array();
  std::vector<float> payload;
  for (const auto& d : lib.directions()) {
    index.push_back({{"trait", d.trait_name},
                     {"layer", d.layer_index},
                     {"n_t", d.n_t},
                     {"n_n", d.n_n},
                     {"mu_t", d.mu_t},
                     {"method", to_string(d.method)}});
    payload.insert(payload.end(), d.r_raw.begin(), d.r_raw.end());
  }
  const json header = {{"d_model", lib.d_model()}, {"directions", index}};
  return encode_framed(kLibraryMagic, header, payload);
}

DirectionLibrary decode_library(std::span<const std::uint8_t> bytes) {
  const FramedFile f = decode_framed(kLibraryMagic, bytes);
  std::vector<PersonaDirection> dirs;
  try {
    const auto d_model = f.header.at("d_model").get<std::size_t>();
    const auto& index = f.header.at("directions");
    if (f.payload.size() != index.size() * d_model) {
      throw FormatError("length", "library payload does not match index");
    }
    for (std::size_t i = 0; i < index.size(); ++i) {
      const auto& e = index[i];
      PersonaDirection d;
      d.trait_name = e.at("trait").get<std::string>();
      d.layer_index = e.at("layer").get<std::uint32_t>();
      d.n_t = e.at("n_t").get<std::size_t>();
      d.n_n = e.at("n_n").get<std::size_t>();
      d.mu_t = e.at("mu_t").get<double>();
      d.method = direction_method_from_string(e.at("method").get<std::string>());
      d.r_raw.assign(f.payload.begin() + static_cast<std::ptrdiff_t>(i * d_model),
                     f.payload.begin() + static_cast<std::ptrdiff_t>((i + 1) * d_model));
      for (double x : d.r_raw) {
        if (!std::isfinite(x)) throw FormatError("nonfinite", "direction '" + d.trait_name + "'");
      }
      d.r_hat = normalize(d.r_raw);
      dirs.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw FormatError("header", e.what());
  }
  return DirectionLibrary(std::move(dirs));
}

void save_library(const DirectionLibrary& lib, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  write_file_bytes(dir / kLibraryFileName, encode_library(lib));
}

DirectionLibrary load_library(const fs::path& dir) {
  const fs::path file = fs::is_directory(dir) ? dir / kLibraryFileName : dir;
  return decode_library(read_file_bytes(file));
}

}  // namespace persona
