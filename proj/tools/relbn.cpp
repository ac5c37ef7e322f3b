// relbn: learn, fit and query Join Bayes nets over a relational database.

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "relbn/database.hpp"
#include "relbn/frequency.hpp"
#include "relbn/learn_and_join.hpp"
#include "relbn/model.hpp"
#include "relbn/query.hpp"
#include "relbn/vj_estimator.hpp"

namespace {

using namespace relbn;

std::map<std::string, std::size_t> parse_sizes(const std::string& text) {
  std::map<std::string, std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const auto item = text.substr(pos, comma - pos);
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--sizes expects Type=N[,Type=N...], got '" + item + "'");
    std::size_t used = 0;
    const auto digits = item.substr(eq + 1);
    const auto n = std::stoull(digits, &used);
    if (used != digits.size()) throw std::invalid_argument("bad size '" + digits + "'");
    out[item.substr(0, eq)] = static_cast<std::size_t>(n);
    pos = comma + 1;
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn and query Join Bayes nets over relational databases"};
  app.require_subcommand(1);

  std::string manifest, model_path, output, text, sizes;
  LearnerConfig cfg;
  std::size_t n = 10;
  std::uint64_t seed = 1;
  bool no_timing = false, verbose = false;

  auto* learn = app.add_subcommand("learn", "learn a JBN structure with learn-and-join");
  learn->add_option("manifest", manifest, "database manifest")->required()->check(CLI::ExistingFile);
  learn->add_option("-o,--output", output, "model file to write")->required();
  learn->add_option("--ess", cfg.ess, "BDeu equivalent sample size")->default_val(8.0);
  learn->add_option("--max-parents", cfg.max_parents, "parent limit per node")->default_val(4);
  learn->add_option("--restarts", cfg.restarts, "random restarts per learner call")->default_val(0);
  learn->add_option("--seed", cfg.seed, "seed for restarts")->default_val(0);
  learn->add_flag("-v,--verbose", verbose, "print one line per learner call");

  auto* fit = app.add_subcommand("fit", "estimate CP-tables from the database");
  fit->add_option("manifest", manifest, "database manifest")->required()->check(CLI::ExistingFile);
  fit->add_option("model", model_path, "model file with a structure")->required()->check(CLI::ExistingFile);
  fit->add_option("-o,--output", output, "fitted model file (default: overwrite the input)");

  auto* query = app.add_subcommand("query", "answer P(target | evidence) from a fitted model");
  query->add_option("model", model_path, "fitted model file")->required()->check(CLI::ExistingFile);
  query->add_option("query", text, "e.g. \"P(grade(S,C)=A | intelligence(S)=3)\"")->required();

  auto* count = app.add_subcommand("count", "grounding count and database frequency of a conjunction");
  count->add_option("manifest", manifest, "database manifest")->required()->check(CLI::ExistingFile);
  count->add_option("conjunction", text, "e.g. \"grade(S,C)=B, salary(S,P)=hi\"")->required();

  auto* bench = app.add_subcommand("benchmark", "compare model answers with direct counts on random queries");
  bench->add_option("manifest", manifest, "database manifest")->required()->check(CLI::ExistingFile);
  bench->add_option("model", model_path, "fitted model file")->required()->check(CLI::ExistingFile);
  bench->add_option("-n", n, "number of queries")->default_val(10);
  bench->add_option("--seed", seed, "query generator seed")->default_val(1);
  bench->add_option("-o,--output", output, "report CSV")->required();
  bench->add_flag("--no-timing", no_timing, "write 0 in the time columns");

  auto* sample = app.add_subcommand("sample", "draw a database from a fitted model");
  sample->add_option("model", model_path, "fitted model file")->required()->check(CLI::ExistingFile);
  sample->add_option("--sizes", sizes, "entities per type, e.g. Student=1000,Course=1000")->required();
  sample->add_option("--seed", seed, "sampler seed")->default_val(1);
  sample->add_option("-o,--output", output, "directory for the manifest and CSV files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*learn) {
      const auto db = load_database(manifest);
      LearnReport report;
      const auto dag = learn_jbn_structure(db, cfg, &report);
      if (verbose) {
        for (const auto& line : report.lines) std::cerr << line << '\n';
      }
      save_model(JbnModel{db.schema(), make_jbn(db.schema(), dag)}, output);
      std::cout << "nodes: " << dag.size() << "\nedges: " << dag.edge_count() << '\n';
    } else if (*fit) {
      const auto db = load_database(manifest);
      const auto structure = load_model(model_path);
      if (!(structure.schema == db.schema())) throw std::invalid_argument("model schema differs from the database schema");
      const auto model = fit_jbn(db, structure.net.dag());
      save_model(model, output.empty() ? model_path : output);
      std::cout << "fitted " << model.net.size() << " families\n";
    } else if (*query) {
      const auto model = load_model(model_path);
      const auto q = parse_query(model.schema, text);
      std::cout << to_string(model.schema, q) << " = " << format_double(model_estimate(model, q)) << '\n';
    } else if (*count) {
      const auto db = load_database(manifest);
      const auto c = parse_conjunction(db.schema(), text);
      const auto r = frequency(db, c);
      std::cout << "count: " << r.count << "\ngroundings: " << r.grounding_space << "\nfrequency: " << r.count << '/'
                << r.grounding_space << " = " << r.frequency() << '\n';
    } else if (*bench) {
      const auto db = load_database(manifest);
      const auto model = load_model(model_path);
      const auto rows = benchmark(db, model, n, seed);
      write_file(output, benchmark_csv(rows, !no_timing));
      auto summary = summarize(rows);
      if (no_timing) summary.mean_t_model_s = summary.mean_t_direct_s = 0;
      std::cout << format_summary(summary);
    } else if (*sample) {
      const auto model = load_model(model_path);
      const auto db = sample_database(model, parse_sizes(sizes), seed);
      std::cout << "wrote " << write_database(db, output).string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "relbn: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
