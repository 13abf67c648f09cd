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

// Command-line front end over the C API.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "persona/persona.h"

namespace fs = std::filesystem;

namespace {

struct Failure {
  persona_status status;
};

void check(persona_status s) {
  if (s != PERSONA_OK) throw Failure{s};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  persona_string_free(s);
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

// Minimal JSON string escaping for values we splice into requests.
std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out + "\"";
}

class Library {
 public:
  explicit Library(const fs::path& dir) { check(persona_library_load(dir.c_str(), &lib_)); }
  Library(const Library&) = delete;
  Library& operator=(const Library&) = delete;
  ~Library() { persona_library_free(lib_); }
  persona_library* get() const { return lib_; }

 private:
  persona_library* lib_ = nullptr;
};

class Model {
 public:
  Model(const std::optional<fs::path>& path, std::optional<std::uint64_t> seed) {
    if (path) {
      check(persona_model_load(path->c_str(), &model_));
    } else {
      const std::string cfg = "{\"seed\": " + std::to_string(*seed) + "}";
      check(persona_model_create(cfg.c_str(), &model_));
    }
  }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  ~Model() { persona_model_free(model_); }
  persona_model* get() const { return model_; }

 private:
  persona_model* model_ = nullptr;
};

persona_server* g_server = nullptr;

void on_signal(int) {
  if (g_server) persona_server_stop(g_server);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persona steering-vector toolkit"};
  app.require_subcommand(1);
  std::string workdir = ".";
  app.add_option("--workdir", workdir, "Root for relative paths");

  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : fs::path(workdir) / path;
  };

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "Write synthetic activation dumps");
  std::string gen_spec, gen_out;
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::size_t> gen_d, gen_traits, gen_prompts, gen_clusters;
  std::optional<double> gen_sigma;
  bool gen_bundled = false;
  gen->add_option("--spec", gen_spec, "Spec JSON file");
  gen->add_option("--seed", gen_seed, "RNG seed (required unless the spec sets one)");
  gen->add_option("--d-model", gen_d);
  gen->add_option("--traits", gen_traits);
  gen->add_option("--prompts", gen_prompts);
  gen->add_option("--clusters", gen_clusters);
  gen->add_option("--sigma", gen_sigma);
  gen->add_flag("--bundled-names", gen_bundled, "Name traits from the bundled lexicon");
  gen->add_option("--out", gen_out, "Output dump directory")->required();

  // extract
  auto* ext = app.add_subcommand("extract", "Extract a direction library from dumps");
  std::string ext_dumps, ext_lexicon, ext_method = "diff_of_means", ext_out;
  ext->add_option("--dumps", ext_dumps)->required();
  ext->add_option("--lexicon", ext_lexicon, "Lexicon JSON, or 'bundled'");
  ext->add_option("--method", ext_method, "diff | paired");
  ext->add_option("--out", ext_out, "Library directory")->required();

  // analyze
  auto* ana = app.add_subcommand("analyze", "Run a persona-space analysis");
  std::string ana_lib, ana_kind, ana_params, ana_params_file, ana_out;
  std::optional<std::uint64_t> ana_seed;
  ana->add_option("--lib,--library", ana_lib)->required();
  ana->add_option("kind,--kind", ana_kind, "pca | kmeans | tsne | greedy | ranking | proximity")->required();
  ana->add_option("--params", ana_params, "Inline JSON parameters");
  ana->add_option("--params-file", ana_params_file);
  ana->add_option("--seed", ana_seed);
  ana->add_option("--out", ana_out, "Report directory");

  // steer
  auto* st = app.add_subcommand("steer", "Generate with a steering intervention");
  std::string st_lib, st_trait, st_mode = "induce", st_prompt, st_out;
  std::optional<std::string> st_model;
  std::optional<std::uint64_t> st_seed;
  std::optional<std::size_t> st_layer;
  double st_alpha = 1.35;
  std::size_t st_max_new = 16;
  st->add_option("--lib,--library", st_lib)->required();
  st->add_option("--trait", st_trait)->required();
  st->add_option("--mode", st_mode, "induce | ablate | orthogonalize");
  st->add_option("--alpha", st_alpha);
  st->add_option("--layer", st_layer);
  st->add_option("--prompt", st_prompt);
  st->add_option("--max-new", st_max_new);
  st->add_option("--model", st_model, "Toy-model weights file");
  st->add_option("--model-seed", st_seed, "Seed for a fresh toy model");
  st->add_option("--out", st_out, "Transcript JSON path");

  // heatmap
  auto* hm = app.add_subcommand("heatmap", "Mean activation-delta heatmap");
  std::string hm_persona, hm_baseline, hm_out, hm_report;
  std::string hm_grid = "8x8";
  hm->add_option("--persona", hm_persona)->required();
  hm->add_option("--baseline", hm_baseline)->required();
  hm->add_option("--grid", hm_grid, "HxW cell grid");
  hm->add_option("--out", hm_out, "PGM image path")->required();
  hm->add_option("--report", hm_report, "JSON report path");

  // init-model
  auto* im = app.add_subcommand("init-model", "Write freshly initialised toy-model weights");
  std::uint64_t im_seed = 0;
  std::string im_out;
  im->add_option("--seed", im_seed)->required();
  im->add_option("--out", im_out)->required();

  // serve
  auto* sv = app.add_subcommand("serve", "Run the HTTP service");
  std::optional<std::string> sv_lib, sv_model;
  std::string sv_host = "127.0.0.1";
  int sv_port = 8080;
  std::uint64_t sv_seed = 0;
  sv->add_option("--lib,--library", sv_lib);
  sv->add_option("--model", sv_model);
  sv->add_option("--host", sv_host);
  sv->add_option("--port", sv_port);
  sv->add_option("--seed", sv_seed, "Seed for the toy model and trait clustering")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      std::string spec = gen_spec.empty() ? "{}" : read_file(resolve(gen_spec));
      // Splice flag overrides ahead of the closing brace.
      auto pos = spec.find_last_of('}');
      if (pos == std::string::npos) {
        std::cerr << "error: spec is not a JSON object\n";
        return 2;
      }
      std::string extra;
      auto add = [&](const std::string& k, const std::string& v) { extra += ", " + quote(k) + ": " + v; };
      if (gen_seed) add("seed", std::to_string(*gen_seed));
      if (gen_d) add("d_model", std::to_string(*gen_d));
      if (gen_traits) add("n_traits", std::to_string(*gen_traits));
      if (gen_prompts) add("n_prompts_per_trait", std::to_string(*gen_prompts));
      if (gen_clusters) add("n_clusters", std::to_string(*gen_clusters));
      if (gen_sigma) {
        std::ostringstream s;
        s.precision(17);
        s << *gen_sigma;
        add("noise_sigma", s.str());
      }
      if (gen_bundled) add("trait_names", "\"bundled\"");
      const bool empty_obj = spec.find_first_not_of(" \t\r\n{") == pos;
      if (empty_obj && !extra.empty()) extra.erase(0, 2);
      spec.insert(pos, extra);
      const fs::path out = resolve(gen_out);
      check(persona_generate_synthetic(spec.c_str(), out.c_str()));
      std::cout << "wrote synthetic dumps to " << out.string() << "\n";
    } else if (*ext) {
      const fs::path dumps = resolve(ext_dumps);
      std::string lex;
      if (!ext_lexicon.empty()) lex = ext_lexicon == "bundled" ? ext_lexicon : resolve(ext_lexicon).string();
      persona_library* lib = nullptr;
      check(persona_library_extract(dumps.c_str(), lex.empty() ? nullptr : lex.c_str(),
                                    ext_method.c_str(), &lib));
      const fs::path out = resolve(ext_out);
      const persona_status s = persona_library_save(lib, out.c_str());
      const std::size_t n = persona_library_size(lib);
      persona_library_free(lib);
      check(s);
      std::cout << "extracted " << n << " directions to " << out.string() << "\n";
    } else if (*ana) {
      std::string params = ana_params;
      if (!ana_params_file.empty()) params = read_file(resolve(ana_params_file));
      if (params.empty()) params = "{}";
      if (ana_seed) {
        const auto pos = params.find_last_of('}');
        const bool empty_obj = params.find_first_not_of(" \t\r\n{") == pos;
        params.insert(pos, (empty_obj ? "" : ", ") + std::string("\"seed\": ") + std::to_string(*ana_seed));
      }
      Library lib(resolve(ana_lib));
      const std::string out = ana_out.empty() ? "" : resolve(ana_out).string();
      char* report = nullptr;
      check(persona_analyze(lib.get(), ana_kind.c_str(), params.c_str(),
                            out.empty() ? nullptr : out.c_str(), &report));
      const std::string text = take(report);
      if (out.empty()) std::cout << text;
      else std::cout << "wrote " << ana_kind << " report to " << out << "\n";
    } else if (*st) {
      if (!st_model && !st_seed) {
        std::cerr << "error: steer needs --model or --model-seed\n";
        return 2;
      }
      Library lib(resolve(st_lib));
      std::optional<fs::path> model_path;
      if (st_model) model_path = resolve(*st_model);
      Model model(model_path, st_seed);
      std::ostringstream req;
      req.precision(17);
      req << "{\"trait\": " << quote(st_trait) << ", \"mode\": " << quote(st_mode)
          << ", \"alpha\": " << st_alpha << ", \"prompt\": " << quote(st_prompt)
          << ", \"max_new_tokens\": " << st_max_new;
      if (st_layer) req << ", \"layer\": " << *st_layer;
      req << "}";
      char* transcript = nullptr;
      check(persona_steer(model.get(), lib.get(), req.str().c_str(), &transcript));
      const std::string text = take(transcript);
      if (st_out.empty()) std::cout << text;
      else {
        write_file(resolve(st_out), text);
        std::cout << "wrote transcript to " << resolve(st_out).string() << "\n";
      }
      if (st_mode == "induce" && (st_alpha < 1.3 || st_alpha > 1.4)) {
        std::cerr << "warning: alpha " << st_alpha << " is outside [1.3, 1.4]\n";
      }
    } else if (*hm) {
      std::size_t h = 0, w = 0;
      char tail = 0;
      if (std::sscanf(hm_grid.c_str(), "%zux%zu%c", &h, &w, &tail) != 2) {
        std::cerr << "error: --grid must look like 64x64\n";
        return 2;
      }
      const fs::path a = resolve(hm_persona), b = resolve(hm_baseline), img = resolve(hm_out);
      char* report = nullptr;
      check(persona_heatmap(a.c_str(), b.c_str(), h, w, img.c_str(), &report));
      const std::string text = take(report);
      if (!hm_report.empty()) write_file(resolve(hm_report), text);
      std::cout << "wrote heatmap to " << img.string() << "\n";
    } else if (*im) {
      Model model(std::nullopt, im_seed);
      const fs::path out = resolve(im_out);
      check(persona_model_save(model.get(), out.c_str()));
      std::cout << "wrote model to " << out.string() << "\n";
    } else if (*sv) {
      std::optional<fs::path> model_path;
      if (sv_model) model_path = resolve(*sv_model);
      Model model(model_path, sv_seed);
      std::unique_ptr<Library> lib;
      if (sv_lib) lib = std::make_unique<Library>(resolve(*sv_lib));
      const std::string cfg = "{\"analytics_seed\": " + std::to_string(sv_seed) +
                              ", \"workdir\": " + quote(fs::absolute(workdir).string()) + "}";
      persona_server* server = nullptr;
      check(persona_server_create(lib ? lib->get() : nullptr, model.get(), cfg.c_str(), &server));
      int bound = 0;
      const persona_status s = persona_server_start(server, sv_host.c_str(), sv_port, &bound);
      if (s != PERSONA_OK) {
        persona_server_free(server);
        check(s);
      }
      std::cout << "listening on " << sv_host << ":" << bound << std::endl;
      g_server = server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      persona_server_wait(server);
      g_server = nullptr;
      persona_server_free(server);
    }
  } catch (const Failure& f) {
    std::cerr << "error (" << persona_status_name(f.status) << "): " << persona_last_error() << "\n";
    return persona_exit_code(f.status);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
