// quantconn: desk-scale laboratory for harmonic measure and quantitative
// connectivity experiments.
//
//   quantconn run E1..E7 [--config file] [--seed N] [--walks N] [--out dir]
//   quantconn render --in report.json --format json|csv|svg [--out dir]
//
// Exit codes: 0 all checks pass, 2 a checked metric failed, 1 execution error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "quantconn/experiments.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"harmonic measure & quantitative connectivity laboratory"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a named experiment");
  std::string name, config_path, out_dir;
  long walks = -1;
  long long seed = -1;
  run->add_option("experiment", name, "one of E1..E7")->required();
  run->add_option("--config", config_path, "JSON config file");
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--walks", walks, "override the walk count");
  run->add_option("--out", out_dir, "output directory");

  auto* render = app.add_subcommand("render", "render a report file");
  std::string in_path, format = "json", render_out;
  render->add_option("--in", in_path, "report JSON produced by run")->required();
  render->add_option("--format", format, "json | csv | svg");
  render->add_option("--out", render_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      qc::ExperimentConfig cfg;
      if (!config_path.empty()) cfg = qc::parse_config(slurp(config_path));
      cfg.experiment = name;
      if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
      if (walks >= 0) cfg.walks = walks;
      if (!out_dir.empty()) cfg.out_dir = out_dir;

      auto report = qc::run_experiment(cfg);
      fs::path dir = cfg.out_dir.empty() ? "." : cfg.out_dir;
      fs::create_directories(dir);
      spit(dir / (name + "_report.json"), qc::report_to_json(report));
      spit(dir / (name + "_report.csv"), qc::report_to_csv(report));
      spit(dir / (name + "_report.svg"), qc::report_to_svg(report));

      for (const auto& r : report.records) {
        std::cout << (r.checked ? (r.pass ? "[PASS] " : "[FAIL] ") : "[  --] ") << r.name << " = "
                  << r.value;
        if (r.stderr_ > 0) std::cout << " +- " << r.stderr_;
        if (!r.note.empty()) std::cout << "   (" << r.note << ")";
        std::cout << "\n";
      }
      std::cout << (report.all_pass ? "ALL CHECKS PASS" : "CHECK FAILURES PRESENT") << "\n";
      return report.all_pass ? 0 : 2;
    }

    if (render->parsed()) {
      auto report = qc::report_from_json(slurp(in_path));
      fs::path dir = render_out.empty() ? fs::path(in_path).parent_path() : fs::path(render_out);
      if (dir.empty()) dir = ".";
      fs::create_directories(dir);
      fs::path base = dir / fs::path(in_path).stem();
      if (format == "json") {
        spit(base.string() + ".rendered.json", qc::report_to_json(report));
      } else if (format == "csv") {
        spit(base.string() + ".csv", qc::report_to_csv(report));
      } else if (format == "svg") {
        spit(base.string() + ".svg", qc::report_to_svg(report));
      } else {
        throw std::invalid_argument("unknown format " + format);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
