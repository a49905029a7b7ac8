// Copyright 2026 The DALM Authors
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

// Batch front end. Exit codes: 0 success, 1 validation rejections present,
// 2 usage or format errors. Every subcommand is a thin mapping onto the
// library API; randomized subcommands honor --seed for byte-reproducible
// output.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dalm/dalm.hpp"

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dalm::FormatError("cannot open file", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw dalm::FormatError("cannot write file", path);
  out << content;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream ss(text);
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) out.push_back(token);
  }
  return out;
}

struct GlobalOptions {
  std::string library_path;
  std::string meta_path;
  std::string embeddings_path;
  std::uint64_t seed = 0;
  std::string format = "text";

  bool json_output() const { return format == "json"; }

  dalm::MetaFiber load_meta() const {
    if (meta_path.empty()) return dalm::default_meta_fiber();
    return dalm::load_meta_fiber(read_file(meta_path));
  }

  dalm::CrystalLibrary load_library(bool allow_missing) const {
    dalm::MetaFiber meta = load_meta();
    if (library_path.empty() || !std::filesystem::exists(library_path)) {
      if (!allow_missing) {
        throw dalm::FormatError("library file not found",
                                library_path.empty() ? "--library" : library_path);
      }
      return dalm::CrystalLibrary(std::move(meta));
    }
    return dalm::load_library(read_file(library_path), meta);
  }

  std::optional<dalm::EmbeddingSpace> load_space() const {
    if (embeddings_path.empty()) return std::nullopt;
    return dalm::load_space(read_file(embeddings_path));
  }
};

json summary_to_json(const dalm::IngestSummary& summary) {
  json rejected = json::object();
  for (const auto& [reason, count] : summary.rejected) {
    rejected[dalm::to_string(reason)] = count;
  }
  json records = json::array();
  for (const auto& rec : summary.rejected_records) {
    records.push_back({{"line", rec.line},
                       {"crystal", dalm::crystal_to_json(rec.crystal)},
                       {"reason", dalm::to_string(rec.report.reason)},
                       {"details", rec.report.details}});
  }
  json suggestions = json::array();
  for (const auto& s : summary.suggestions) {
    suggestions.push_back({{"domain", s.domain.str()},
                           {"existing", dalm::crystal_to_json(s.existing)},
                           {"candidate", dalm::crystal_to_json(s.candidate)},
                           {"children", {s.child_a.str(), s.child_b.str()}}});
  }
  return json{{"accepted", summary.accepted},
              {"rejected", rejected},
              {"rejected_records", records},
              {"suggestions", suggestions}};
}

void print_summary(const dalm::IngestSummary& summary, bool as_json) {
  if (as_json) {
    std::cout << summary_to_json(summary).dump() << "\n";
    return;
  }
  std::cout << "accepted: " << summary.accepted
            << ", rejected: " << summary.rejected_total() << "\n";
  for (const auto& rec : summary.rejected_records) {
    std::cout << "  line " << rec.line << ": "
              << dalm::to_string(rec.report.reason) << " — "
              << rec.report.details << "\n";
  }
  for (const auto& s : summary.suggestions) {
    std::cout << "  split suggestion for " << s.domain.str() << ": "
              << s.child_a.str() << " / " << s.child_b.str() << "\n";
  }
}

int cmd_ingest(const GlobalOptions& global, const std::string& input,
               const std::string& scope_name, bool no_auto_register) {
  dalm::CrystalLibrary lib = global.load_library(/*allow_missing=*/true);
  lib.auto_register_domains = !no_auto_register;
  const dalm::ValidationScope scope = scope_name == "effective"
                                          ? dalm::ValidationScope::effective
                                          : dalm::ValidationScope::local;
  std::ifstream in(input, std::ios::binary);
  if (!in) throw dalm::FormatError("cannot open input", input);
  const dalm::IngestSummary summary = dalm::bulk_ingest(in, lib, scope);
  print_summary(summary, global.json_output());
  if (!global.library_path.empty()) {
    write_file(global.library_path, dalm::save_crystals(lib));
  }
  return summary.rejected_total() > 0 ? 1 : 0;
}

int cmd_validate(const GlobalOptions& global, const std::string& scope_name) {
  const dalm::CrystalLibrary lib = global.load_library(/*allow_missing=*/false);
  const dalm::ValidationScope scope = scope_name == "effective"
                                          ? dalm::ValidationScope::effective
                                          : dalm::ValidationScope::local;
  std::vector<std::string> failures;
  dalm::is_gate_fixed_point(lib, scope, &failures);
  const std::size_t total = lib.crystal_count();
  if (global.json_output()) {
    std::cout << json{{"accepted", total - failures.size()},
                      {"rejected", failures.size()},
                      {"failures", failures}}
                     .dump()
              << "\n";
  } else {
    std::cout << "accepted: " << total - failures.size()
              << ", rejected: " << failures.size() << "\n";
    for (const auto& f : failures) std::cout << "  " << f << "\n";
  }
  return failures.empty() ? 0 : 1;
}

int cmd_query(const GlobalOptions& global, const std::string& domain,
              const std::string& subject, const std::string& relation,
              const std::string& object, bool no_inherited, bool multi,
              const std::string& concepts, double epsilon,
              const std::string& activation) {
  const dalm::CrystalLibrary lib = global.load_library(/*allow_missing=*/false);
  dalm::QueryPattern pattern;
  if (!subject.empty()) pattern.subject = subject;
  if (!relation.empty()) pattern.relation = relation;
  if (!object.empty()) pattern.object = object;
  pattern.include_inherited = !no_inherited;
  if (!pattern.valid()) {
    throw dalm::Error("query requires at least one of --subject/--relation/--object");
  }

  if (multi) {
    if (concepts.empty()) {
      throw dalm::Error("--multi requires --concepts for domain activation");
    }
    dalm::GenerationConfig config;
    config.epsilon = epsilon;
    config.seed = global.seed;
    config.activation_source = activation == "embedding"
                                   ? dalm::ActivationSource::embedding
                                   : dalm::ActivationSource::overlap;
    const auto space = global.load_space();
    const auto activations = dalm::activate_domains(
        split_list(concepts), lib, space ? &*space : nullptr, config);
    const auto answers =
        dalm::multi_perspective_query(pattern, lib, activations, epsilon);
    if (global.json_output()) {
      std::cout << dalm::perspectives_to_json(pattern, answers).dump() << "\n";
    } else {
      for (const auto& p : answers) {
        std::cout << p.domain.str() << " (weight " << p.weight << "):\n";
        for (const auto& tc : p.answers) {
          std::cout << "  " << dalm::tagged_crystal_to_json(tc).dump() << "\n";
        }
      }
    }
    return 0;
  }

  if (domain.empty()) throw dalm::Error("query requires --domain (or --multi)");
  const auto results =
      dalm::query(pattern, dalm::DomainPath::parse(domain), lib);
  if (global.json_output()) {
    json out = json::array();
    for (const auto& tc : results) out.push_back(dalm::tagged_crystal_to_json(tc));
    std::cout << out.dump() << "\n";
  } else {
    for (const auto& tc : results) {
      std::cout << dalm::tagged_crystal_to_json(tc).dump() << "\n";
    }
  }
  return 0;
}

int cmd_generate(const GlobalOptions& global, const std::string& concepts,
                 const std::string& mode, const std::string& vocab,
                 double epsilon, double theta_novel, std::size_t max_concepts,
                 const std::string& activation) {
  const dalm::CrystalLibrary lib = global.load_library(/*allow_missing=*/false);
  dalm::GenerationConfig config;
  config.epsilon = epsilon;
  config.theta_novel = theta_novel;
  config.max_concepts_per_pair = max_concepts;
  config.seed = global.seed;
  config.vocabulary = vocab == "open" ? dalm::VocabularyMode::open
                                      : dalm::VocabularyMode::closed;
  if (mode == "multi") {
    config.output_mode = dalm::OutputMode::multi_perspective;
  } else if (mode == "verbalized") {
    config.output_mode = dalm::OutputMode::verbalized;
  } else {
    config.output_mode = dalm::OutputMode::crystal;
  }
  config.activation_source = activation == "embedding"
                                 ? dalm::ActivationSource::embedding
                                 : dalm::ActivationSource::overlap;
  const auto space = global.load_space();
  const dalm::GeneratedOutput output = dalm::generate(
      split_list(concepts), lib, space ? &*space : nullptr, config);
  if (global.json_output()) {
    std::cout << dalm::output_to_json(output).dump() << "\n";
  } else if (output.rendered) {
    std::cout << *output.rendered;
  } else {
    for (const auto& entry : output.entries) {
      for (const auto& rel : entry.relations) {
        for (const auto& gc : rel.concepts) {
          json t{{"s", entry.anchor},
                 {"r", rel.relation},
                 {"d", entry.domain.str()},
                 {"o", gc.concept_id},
                 {"p", gc.probability},
                 {"status", dalm::to_string(gc.status)}};
          std::cout << t.dump() << "\n";
        }
      }
    }
  }
  return 0;
}

int cmd_train(const GlobalOptions& global, const std::string& out_path,
              const std::string& geometry, std::size_t dim, std::size_t epochs,
              double learning_rate, double margin, std::size_t negatives,
              std::size_t completion_epochs) {
  const dalm::CrystalLibrary lib = global.load_library(/*allow_missing=*/false);
  dalm::TrainConfig config;
  config.geometry = geometry == "poincare" ? dalm::Geometry::poincare
                                           : dalm::Geometry::euclidean;
  config.dim = dim;
  config.epochs = epochs;
  config.learning_rate = learning_rate;
  config.margin = margin;
  config.negatives_per_positive = negatives;
  config.seed = global.seed;
  dalm::CompletionReport completion;
  auto [space, report] =
      dalm::train_embeddings(lib, config, completion_epochs, &completion);
  write_file(out_path, dalm::save_space(space));
  json j{{"epochs", report.epoch_loss.size()},
         {"final_loss",
          report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back()},
         {"constraint_satisfaction", report.constraint_satisfaction},
         {"triplets_per_epoch", report.triplets_per_epoch},
         {"completion_epochs", completion.epoch_loss.size()},
         {"final_cross_entropy", completion.final_cross_entropy},
         {"out", out_path}};
  if (global.json_output()) {
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "trained " << dalm::to_string(config.geometry) << " dim "
              << dim << ": final loss "
              << (report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back())
              << ", constraint satisfaction " << report.constraint_satisfaction
              << "\n";
    if (completion_epochs > 0) {
      std::cout << "completion cross-entropy: "
                << completion.final_cross_entropy << "\n";
    }
  }
  return 0;
}

int cmd_route(const GlobalOptions& global, const std::string& concepts,
              std::size_t k) {
  const dalm::CrystalLibrary lib = global.load_library(/*allow_missing=*/false);
  const auto space = global.load_space();
  if (!space) throw dalm::MissingEmbedding("route requires --embeddings");
  const dalm::RouteResult result =
      dalm::hierarchical_route(split_list(concepts), lib, *space, k);
  if (global.json_output()) {
    json top = json::array();
    for (const auto& [d, s] : result.top) {
      top.push_back({{"domain", d.str()}, {"score", s}});
    }
    std::cout << json{{"top", top}, {"visited", result.visited}}.dump() << "\n";
  } else {
    for (const auto& [d, s] : result.top) {
      std::cout << d.str() << " score " << s << "\n";
    }
    std::cout << "visited: " << result.visited << "\n";
  }
  return 0;
}

int cmd_simulate(const GlobalOptions& global, const std::string& preset,
                 std::size_t depth, std::size_t branching,
                 std::size_t concepts_per_fiber, std::size_t crystals_per_fiber,
                 double shared_fraction, const std::string& grid_text,
                 std::size_t trials, const std::string& fields_text,
                 const std::string& out_path) {
  dalm::CrystalLibrary lib;
  if (!global.library_path.empty() &&
      std::filesystem::exists(global.library_path)) {
    lib = global.load_library(/*allow_missing=*/false);
  } else {
    dalm::SynthSpec spec;
    if (preset == "icd11") {
      spec = dalm::icd11_like_preset(global.seed);
    } else {
      spec.depth = depth;
      spec.branching = branching;
      spec.concepts_per_fiber = concepts_per_fiber;
      spec.crystals_per_fiber = crystals_per_fiber;
      spec.shared_fraction = shared_fraction;
      spec.seed = global.seed;
    }
    lib = dalm::synth_corpus(spec);
  }
  std::vector<double> grid;
  for (const auto& g : split_list(grid_text)) grid.push_back(std::stod(g));
  std::set<dalm::CrystalField> maskable;
  for (const auto& f : split_list(fields_text)) {
    if (f == "domain") maskable.insert(dalm::CrystalField::domain);
    else if (f == "relation") maskable.insert(dalm::CrystalField::relation);
    else if (f == "subject") maskable.insert(dalm::CrystalField::subject);
    else if (f == "object") maskable.insert(dalm::CrystalField::object);
    else throw dalm::Error("unknown field \"" + f + "\"");
  }
  const auto space = global.load_space();
  const dalm::DenoiseResult result = dalm::experiment(
      lib, space ? &*space : nullptr, grid, trials, global.seed, maskable);
  const std::string csv = dalm::to_csv(result);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    write_file(out_path, csv);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_export(const GlobalOptions& global, const std::string& what,
               const std::string& out_path) {
  std::string content;
  if (what == "meta") {
    content = dalm::save_meta(global.load_meta());
  } else if (what == "embeddings") {
    const auto space = global.load_space();
    if (!space) throw dalm::MissingEmbedding("export embeddings requires --embeddings");
    content = dalm::save_space(*space);
  } else {
    content = dalm::save_crystals(global.load_library(/*allow_missing=*/false));
  }
  if (out_path.empty()) {
    std::cout << content;
  } else {
    write_file(out_path, content);
  }
  return 0;
}

int cmd_stats(const GlobalOptions& global) {
  const dalm::CrystalLibrary lib = global.load_library(/*allow_missing=*/false);
  std::size_t fibers = 0;
  json per_fiber = json::object();
  for (const auto& [d, f] : lib.fibers()) {
    if (f.crystals.empty()) continue;
    ++fibers;
    per_fiber[d.str()] = f.crystals.size();
  }
  json j{{"domains", lib.lattice().size()},
         {"fibers", fibers},
         {"crystals", lib.crystal_count()},
         {"provisional", lib.provisional().size()},
         {"relations", lib.meta().relation_names()},
         {"crystals_per_fiber", per_fiber}};
  if (global.json_output()) {
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "domains: " << lib.lattice().size() << "\n"
              << "fibers: " << fibers << "\n"
              << "crystals: " << lib.crystal_count() << "\n"
              << "provisional: " << lib.provisional().size() << "\n";
    for (const auto& [d, n] : per_fiber.items()) {
      std::cout << "  " << d << ": " << n << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dalm — domain-algebraic knowledge engine"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--library", global.library_path, "Crystal library JSONL")
      ->envname("DALM_LIBRARY");
  app.add_option("--meta", global.meta_path, "Meta-fiber config JSON");
  app.add_option("--embeddings", global.embeddings_path,
                 "Embedding snapshot JSON");
  app.add_option("--seed", global.seed, "Seed for randomized subcommands");
  app.add_option("--format", global.format, "Output format")
      ->check(CLI::IsMember({"json", "text"}));

  auto* ingest = app.add_subcommand("ingest", "Insert crystals from a JSONL file");
  std::string ingest_input, ingest_scope = "local";
  bool ingest_no_auto = false;
  ingest->add_option("--input", ingest_input, "JSONL input")->required();
  ingest->add_option("--scope", ingest_scope, "Validation scope")
      ->check(CLI::IsMember({"local", "effective"}));
  ingest->add_flag("--no-auto-register", ingest_no_auto,
                   "Reject crystals in unregistered domains");

  auto* validate = app.add_subcommand("validate", "Re-run the gate over the library");
  std::string validate_scope = "local";
  validate->add_option("--scope", validate_scope, "Validation scope")
      ->check(CLI::IsMember({"local", "effective"}));

  auto* query = app.add_subcommand("query", "Domain-scoped pattern query");
  std::string q_domain, q_subject, q_relation, q_object, q_concepts;
  std::string q_activation = "overlap";
  bool q_no_inherited = false, q_multi = false;
  double q_epsilon = 0.05;
  query->add_option("--domain", q_domain, "Domain scope");
  query->add_option("--subject", q_subject, "Subject pattern");
  query->add_option("--relation", q_relation, "Relation pattern");
  query->add_option("--object", q_object, "Object pattern");
  query->add_flag("--no-inherited", q_no_inherited, "Local fiber only");
  query->add_flag("--multi", q_multi, "Multi-perspective output");
  query->add_option("--concepts", q_concepts,
                    "Comma-separated query concepts (with --multi)");
  query->add_option("--epsilon", q_epsilon, "Activation threshold");
  query->add_option("--activation", q_activation, "Activation source")
      ->check(CLI::IsMember({"overlap", "embedding"}));

  auto* generate = app.add_subcommand("generate", "Three-phase constrained generation");
  std::string g_concepts, g_mode = "crystal", g_vocab = "closed";
  std::string g_activation = "overlap";
  double g_epsilon = 0.05, g_theta = 0.15;
  std::size_t g_max = 3;
  generate->add_option("--query", g_concepts, "Comma-separated query concepts")
      ->required();
  generate->add_option("--mode", g_mode, "Output mode")
      ->check(CLI::IsMember({"crystal", "multi", "verbalized"}));
  generate->add_option("--vocab", g_vocab, "Vocabulary mode")
      ->check(CLI::IsMember({"closed", "open"}));
  generate->add_option("--epsilon", g_epsilon, "Activation threshold");
  generate->add_option("--theta-novel", g_theta, "Novelty threshold");
  generate->add_option("--max-concepts", g_max, "Concepts per (domain, relation)");
  generate->add_option("--activation", g_activation, "Activation source")
      ->check(CLI::IsMember({"overlap", "embedding"}));

  auto* train = app.add_subcommand("train-embeddings",
                                   "Train lattice-structured embeddings");
  std::string t_out, t_geometry = "euclidean";
  std::size_t t_dim = 32, t_epochs = 200, t_negatives = 5, t_completion = 0;
  double t_lr = 0.05, t_margin = 1.0;
  train->add_option("--out", t_out, "Snapshot output path")->required();
  train->add_option("--geometry", t_geometry, "Embedding geometry")
      ->check(CLI::IsMember({"euclidean", "poincare"}));
  train->add_option("--dim", t_dim, "Embedding dimension");
  train->add_option("--epochs", t_epochs, "Training epochs");
  train->add_option("--learning-rate", t_lr, "Learning rate");
  train->add_option("--margin", t_margin, "Triplet margin");
  train->add_option("--negatives", t_negatives, "Negatives per positive");
  train->add_option("--completion-epochs", t_completion,
                    "Concept-completion epochs (0 skips)");

  auto* route = app.add_subcommand("route", "Hierarchical domain routing");
  std::string r_concepts;
  std::size_t r_k = 3;
  route->add_option("--concepts", r_concepts, "Comma-separated query concepts")
      ->required();
  route->add_option("--k", r_k, "Beam width / result count");

  auto* simulate = app.add_subcommand("simulate-denoise",
                                      "Structured vs random denoising lab");
  std::string s_preset, s_grid = "0,0.25,0.5,0.75,1.0";
  std::string s_fields = "domain,relation,subject,object", s_out;
  std::size_t s_depth = 2, s_branching = 3, s_concepts = 10, s_crystals = 20;
  std::size_t s_trials = 200;
  double s_shared = 0.0;
  simulate->add_option("--preset", s_preset, "Sizing preset")
      ->check(CLI::IsMember({"icd11"}));
  simulate->add_option("--depth", s_depth, "Lattice depth");
  simulate->add_option("--branching", s_branching, "Lattice branching");
  simulate->add_option("--concepts-per-fiber", s_concepts, "Concepts per fiber");
  simulate->add_option("--crystals-per-fiber", s_crystals, "Crystals per fiber");
  simulate->add_option("--shared-fraction", s_shared,
                       "Fraction of concepts shared across fibers");
  simulate->add_option("--grid", s_grid, "Comma-separated noise levels");
  simulate->add_option("--trials", s_trials, "Trials per grid point");
  simulate->add_option("--fields", s_fields, "Comma-separated maskable fields");
  simulate->add_option("--out", s_out, "CSV output path (stdout if omitted)");

  auto* export_cmd = app.add_subcommand("export", "Canonical serialization");
  std::string e_what = "crystals", e_out;
  export_cmd->add_option("--what", e_what, "What to export")
      ->check(CLI::IsMember({"crystals", "meta", "embeddings"}));
  export_cmd->add_option("--out", e_out, "Output path (stdout if omitted)");

  auto* stats = app.add_subcommand("stats", "Library counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (ingest->parsed()) {
      return cmd_ingest(global, ingest_input, ingest_scope, ingest_no_auto);
    }
    if (validate->parsed()) return cmd_validate(global, validate_scope);
    if (query->parsed()) {
      return cmd_query(global, q_domain, q_subject, q_relation, q_object,
                       q_no_inherited, q_multi, q_concepts, q_epsilon,
                       q_activation);
    }
    if (generate->parsed()) {
      return cmd_generate(global, g_concepts, g_mode, g_vocab, g_epsilon,
                          g_theta, g_max, g_activation);
    }
    if (train->parsed()) {
      return cmd_train(global, t_out, t_geometry, t_dim, t_epochs, t_lr,
                       t_margin, t_negatives, t_completion);
    }
    if (route->parsed()) return cmd_route(global, r_concepts, r_k);
    if (simulate->parsed()) {
      return cmd_simulate(global, s_preset, s_depth, s_branching, s_concepts,
                          s_crystals, s_shared, s_grid, s_trials, s_fields,
                          s_out);
    }
    if (export_cmd->parsed()) return cmd_export(global, e_what, e_out);
    if (stats->parsed()) return cmd_stats(global);
  } catch (const dalm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
