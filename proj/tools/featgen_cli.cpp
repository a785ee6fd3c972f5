// featgen: synthesize benchmark datasets, train conditional feature
// generators, and evaluate zero-shot / generalized zero-shot pipelines.
//
// Exit codes: 0 success, 2 usage/config/data error, 3 numerical failure.
// stdout carries only the documented tables; logs go to stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "featgen/dataset.hpp"
#include "featgen/generators.hpp"
#include "featgen/pipeline.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using featgen::ClassifierConfig;
using featgen::Dataset;
using featgen::GeneratorConfig;
using featgen::Rng;

struct RunConfig {
  GeneratorConfig generator;
  ClassifierConfig classifier;
  std::size_t per_class = 500;
  std::uint64_t seed = 1;
  bool generate_for_seen = false;
};

ClassifierConfig classifier_from_json(const nlohmann::json& j) {
  ClassifierConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "learning_rate") {
      cfg.learning_rate = value.get<double>();
    } else if (key == "epochs") {
      cfg.epochs = value.get<std::size_t>();
    } else if (key == "batch_size") {
      cfg.batch_size = value.get<std::size_t>();
    } else {
      throw std::invalid_argument("classifier config: unknown key '" + key +
                                  "'");
    }
  }
  return cfg;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig run;
  for (const auto& [key, value] : j.items()) {
    if (key == "generator") {
      run.generator = featgen::generator_config_from_json(value.dump());
    } else if (key == "classifier") {
      run.classifier = classifier_from_json(value);
    } else if (key == "per_class") {
      run.per_class = value.get<std::size_t>();
    } else if (key == "seed") {
      run.seed = value.get<std::uint64_t>();
    } else if (key == "generate_for_seen") {
      run.generate_for_seen = value.get<bool>();
    } else {
      throw std::invalid_argument("run config: unknown key '" + key + "'");
    }
  }
  return run;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
  if (!text.empty() && text.back() != '\n') os << "\n";
}

void write_train_artifacts(const std::string& model_out,
                           const featgen::TrainReport& report,
                           const std::string& report_path,
                           const std::string& csv_path) {
  // wall_seconds deliberately stays out of the JSON so reruns are
  // byte-identical; it is logged to stderr instead.
  nlohmann::ordered_json j;
  j["loss_names"] = report.loss_names;
  j["final_losses"] = report.final_losses;
  j["epochs_trained"] =
      report.curves.empty() ? 0 : report.curves.front().size();
  j["classes_used"] = report.classes_used;
  j["model_file"] = std::filesystem::path(model_out).filename().string();
  write_text(report_path, j.dump(2));

  std::ostringstream csv;
  csv << "epoch,term,value\n";
  for (std::size_t t = 0; t < report.loss_names.size(); ++t)
    for (std::size_t e = 0; e < report.curves[t].size(); ++e)
      csv << e << "," << report.loss_names[t] << ","
          << report.curves[t][e] << "\n";
  write_text(csv_path, csv.str());
  std::cerr << "trained in " << report.wall_seconds << "s\n";
}

int cmd_synth(const std::string& out_dir, featgen::SyntheticSpec spec) {
  auto [data, oracle] = featgen::make_synthetic(spec);
  featgen::save_dataset(out_dir, "manifest.json", data);
  featgen::save_matrix(
      (std::filesystem::path(out_dir) / "oracle_map.fgz").string(),
      oracle.map_weights);
  nlohmann::ordered_json j;
  j["map_weights"] = "oracle_map.fgz";
  j["map_bias"] = oracle.map_bias;
  j["nonlinearity"] = oracle.nonlinearity == featgen::SyntheticMap::kLinear
                          ? "linear"
                          : "tanh-mixed";
  j["noise_stddev"] = oracle.noise_stddev;
  const auto oracle_path = std::filesystem::path(out_dir) / "oracle.json";
  write_text(oracle_path.string(), j.dump(2));
  std::cout << (std::filesystem::path(out_dir) / "manifest.json").string()
            << "\n"
            << oracle_path.string() << "\n";
  return 0;
}

void print_report(const featgen::EvalReport& report) {
  std::printf("%-10s %12s %16s\n", "scenario", "accuracy", "per-class acc");
  for (const auto& [tag, acc] : report.scenario_accuracy)
    std::printf("%-10s %12.4f %16.4f\n", tag.c_str(), acc,
                report.per_class_accuracy.at(tag));
}

}  // namespace

int main(int argc, char** argv) {
#ifdef _OPENMP
  if (const char* threads = std::getenv("FEATGEN_THREADS")) {
    const int n = std::atoi(threads);
    if (n > 0) omp_set_num_threads(n);
  }
#endif

  CLI::App app{"conditional feature generation for zero-shot classification"};
  app.require_subcommand(1);

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "write a synthetic benchmark");
  std::string out_dir;
  featgen::SyntheticSpec spec;
  std::string nonlinearity = "tanh-mixed";
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--classes", spec.num_classes, "total classes");
  synth->add_option("--seen-count", spec.seen_count, "seen classes");
  synth->add_option("--attr-dim", spec.attr_dim, "attribute dimension");
  synth->add_option("--feature-dim", spec.feature_dim, "feature dimension");
  synth->add_option("--train-per-class", spec.examples_per_class_train,
                    "train images per class");
  synth->add_option("--test-per-class", spec.examples_per_class_test,
                    "test images per class");
  synth->add_option("--noise-stddev", spec.noise_stddev, "feature noise");
  synth->add_option("--nonlinearity", nonlinearity, "linear | tanh-mixed");
  synth->add_option("--seed", spec.seed, "master seed");

  // train ------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train a generator");
  std::string data_path, config_path, model_out, report_path, csv_path;
  train->add_option("--data", data_path, "dataset manifest")->required();
  train->add_option("--config", config_path, "run config JSON");
  train->add_option("--model-out", model_out, "model output path")->required();
  train->add_option("--report", report_path, "train report JSON path");
  train->add_option("--loss-csv", csv_path, "loss curve CSV path");

  // eval -------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "evaluate a trained generator");
  std::string eval_data, eval_model, eval_mode = "gzsc", eval_report;
  std::string eval_config;
  std::size_t per_class = 500;
  std::uint64_t eval_seed = 1;
  eval->add_option("--data", eval_data, "dataset manifest")->required();
  eval->add_option("--model", eval_model, "trained model path")->required();
  eval->add_option("--mode", eval_mode, "zsc | gzsc");
  eval->add_option("--per-class", per_class, "generated rows per class");
  eval->add_option("--report", eval_report, "report JSON path");
  eval->add_option("--config", eval_config, "run config JSON");
  eval->add_option("--seed", eval_seed, "master seed");

  // cv ---------------------------------------------------------------------
  auto* cv = app.add_subcommand("cv", "zero-shot cross-validation");
  std::string cv_data, cv_grid, cv_report, cv_config;
  double holdout = 0.2;
  std::uint64_t cv_seed = 1;
  std::size_t cv_per_class = 500;
  cv->add_option("--data", cv_data, "dataset manifest")->required();
  cv->add_option("--grid", cv_grid, "JSON array of generator configs")
      ->required();
  cv->add_option("--report", cv_report, "CvResult JSON path")->required();
  cv->add_option("--holdout", holdout, "pseudo-unseen fraction");
  cv->add_option("--per-class", cv_per_class, "generated rows per class");
  cv->add_option("--config", cv_config, "run config JSON (classifier/seed)");
  cv->add_option("--seed", cv_seed, "master seed");

  // compare ----------------------------------------------------------------
  auto* compare = app.add_subcommand("compare", "compare the 4 model kinds");
  std::string cmp_data, cmp_configs, cmp_report;
  std::uint64_t cmp_seed = 1;
  std::size_t cmp_per_class = 500;
  compare->add_option("--data", cmp_data, "dataset manifest")->required();
  compare->add_option("--configs", cmp_configs,
                      "JSON object: kind -> generator config")
      ->required();
  compare->add_option("--report", cmp_report, "table JSON path")->required();
  compare->add_option("--per-class", cmp_per_class,
                      "generated rows per class");
  compare->add_option("--seed", cmp_seed, "master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      if (nonlinearity == "linear") {
        spec.nonlinearity = featgen::SyntheticMap::kLinear;
      } else if (nonlinearity == "tanh-mixed") {
        spec.nonlinearity = featgen::SyntheticMap::kTanhMixed;
      } else {
        throw std::invalid_argument("unknown nonlinearity '" + nonlinearity +
                                    "'");
      }
      return cmd_synth(out_dir, spec);
    }

    if (*train) {
      RunConfig run =
          config_path.empty() ? RunConfig{} : load_run_config(config_path);
      const Dataset data = featgen::load_dataset(data_path);
      Rng master(run.seed);
      Rng train_rng = master.child(1);
      auto [model, report] =
          featgen::train_generator(data, run.generator, train_rng);
      featgen::save_generator(model_out, model, run.generator);
      if (report_path.empty()) report_path = model_out + ".train.json";
      if (csv_path.empty()) csv_path = model_out + ".loss.csv";
      write_train_artifacts(model_out, report, report_path, csv_path);
      return 0;
    }

    if (*eval) {
      RunConfig run =
          eval_config.empty() ? RunConfig{} : load_run_config(eval_config);
      if (eval->count("--seed")) run.seed = eval_seed;
      if (eval->count("--per-class")) run.per_class = per_class;
      const Dataset data = featgen::load_dataset(eval_data);
      const featgen::GeneratorModel model =
          featgen::load_generator(eval_model);
      if (model.feature_dim != data.feature_dim() ||
          model.attr_dim != data.attr_dim()) {
        throw std::invalid_argument(
            "model dims (feature " + std::to_string(model.feature_dim) +
            ", attr " + std::to_string(model.attr_dim) +
            ") do not match dataset (feature " +
            std::to_string(data.feature_dim()) + ", attr " +
            std::to_string(data.attr_dim()) + ")");
      }
      Rng master(run.seed);
      featgen::EvalReport report;
      if (eval_mode == "zsc") {
        report = featgen::evaluate_zsc(data, model, run.classifier,
                                       run.per_class, master);
      } else if (eval_mode == "gzsc") {
        report = featgen::evaluate_gzsc(data, model, run.classifier,
                                        run.per_class, master,
                                        run.generate_for_seen);
      } else {
        throw std::invalid_argument("unknown mode '" + eval_mode + "'");
      }
      if (!eval_report.empty()) write_text(eval_report, report.to_json());
      print_report(report);
      return 0;
    }

    if (*cv) {
      RunConfig run =
          cv_config.empty() ? RunConfig{} : load_run_config(cv_config);
      if (cv->count("--seed")) run.seed = cv_seed;
      if (cv->count("--per-class")) run.per_class = cv_per_class;
      std::ifstream is(cv_grid);
      if (!is) throw std::invalid_argument("cannot open grid " + cv_grid);
      nlohmann::json grid_json;
      is >> grid_json;
      if (!grid_json.is_array() || grid_json.empty()) {
        throw std::invalid_argument("grid must be a non-empty JSON array");
      }
      std::vector<GeneratorConfig> grid;
      for (const auto& item : grid_json)
        grid.push_back(featgen::generator_config_from_json(item.dump()));
      const Dataset data = featgen::load_dataset(cv_data);
      Rng master(run.seed);
      const featgen::CvResult result = featgen::zsc_cross_validate(
          data, grid, run.classifier, run.per_class, holdout, master);
      write_text(cv_report, result.to_json());
      std::cout << "selected candidate " << result.selected
                << " with validation accuracy "
                << result.candidates[result.selected].validation_accuracy
                << "\n";
      return 0;
    }

    if (*compare) {
      std::ifstream is(cmp_configs);
      if (!is) {
        throw std::invalid_argument("cannot open configs " + cmp_configs);
      }
      nlohmann::json kinds_json;
      is >> kinds_json;
      std::map<featgen::GeneratorKind, GeneratorConfig> cfgs;
      for (const auto& [key, value] : kinds_json.items()) {
        const auto kind = featgen::generator_kind_from_string(key);
        GeneratorConfig cfg = featgen::generator_config_from_json(value.dump());
        cfg.model_kind = kind;
        cfgs[kind] = cfg;
      }
      const Dataset data = featgen::load_dataset(cmp_data);
      Rng master(cmp_seed);
      ClassifierConfig clf_cfg;
      const featgen::ComparisonTable table = featgen::compare_generators(
          {{std::filesystem::path(cmp_data).parent_path().filename().string(),
            &data}},
          cfgs, clf_cfg, cmp_per_class, master);
      write_text(cmp_report, table.to_json());
      std::cout << table.to_text();
      return 0;
    }
  } catch (const featgen::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
