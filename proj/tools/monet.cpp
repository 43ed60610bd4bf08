// Command-line surface for the despeckling toolkit: dataset synthesis,
// training, inference, evaluation, detection and the loss ablation.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "monet/config.hpp"
#include "monet/dataset.hpp"
#include "monet/detect.hpp"
#include "monet/infer.hpp"
#include "monet/io.hpp"
#include "monet/metrics.hpp"
#include "monet/trainer.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace {

namespace fs = std::filesystem;

struct GlobalArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  int threads = 0;
};

monet::RunConfig resolve_config(const GlobalArgs& g) {
  monet::RunConfig cfg =
      g.config_path.empty() ? monet::RunConfig{} : monet::load_config(g.config_path);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.dataset.seed = *g.seed;
    cfg.train.seed = *g.seed;
    cfg.eval.seed = *g.seed;
  }
#if defined(_OPENMP)
  if (g.threads > 0) omp_set_num_threads(g.threads);
#endif
  return cfg;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw monet::DataError("cannot open output file " + path);
  f << content;
}

int cmd_simulate(const GlobalArgs& g) {
  const monet::RunConfig cfg = resolve_config(g);
  const monet::Dataset ds = monet::build_dataset(cfg.dataset);
  fs::create_directories(g.out_dir);
  monet::save_dataset(ds, g.out_dir);
  std::cout << "wrote " << ds.records.size() << " patches ("
            << ds.train_indices.size() << " train, " << ds.val_indices.size()
            << " val) to " << g.out_dir << "\n";
  return 0;
}

int cmd_train(const GlobalArgs& g, const std::string& data_dir,
              const std::string& resume_prefix) {
  monet::RunConfig cfg = resolve_config(g);
  const monet::Dataset ds = data_dir.empty()
                                ? monet::build_dataset(cfg.dataset)
                                : monet::load_dataset(data_dir);
  fs::create_directories(g.out_dir);
  cfg.train.checkpoint_dir = g.out_dir;

  monet::TrainResult result;
  if (!resume_prefix.empty()) {
    monet::Checkpoint ck = monet::load_checkpoint(resume_prefix);
    result = monet::train(std::move(ck.model), ds, cfg.train, &ck.adam, ck.step);
  } else {
    monet::MonetModel<float> model =
        monet::MonetModel<float>::create(cfg.train.width, cfg.train.seed);
    result = monet::train(std::move(model), ds, cfg.train);
  }
  monet::save_monw(result.model, g.out_dir + "/model.monw");
  write_text(g.out_dir + "/trainlog.csv", result.log.csv());
  if (!result.log.vals.empty()) {
    const monet::ValRecord& v = result.log.vals.back();
    std::cout << "final val: mse " << v.mse << " (noisy " << v.noisy_mse
              << "), ssim " << v.ssim << "\n";
  }
  std::cout << "model written to " << g.out_dir << "/model.monw\n";
  return 0;
}

int cmd_infer(const GlobalArgs& g, const std::string& weights,
              const std::string& input) {
  const monet::RunConfig cfg = resolve_config(g);
  monet::MonetModel<float> model = monet::load_monw<float>(weights);
  const monet::Image<float> noisy = monet::read_image_any(input);
  const monet::Image<float> filtered =
      monet::infer_image(model, noisy, cfg.infer_max_pixels);
  const monet::Image<float> ratio =
      monet::ratio_image(noisy, filtered, cfg.eval.eps_div);
  fs::create_directories(g.out_dir);
  monet::write_sarf(filtered, g.out_dir + "/xhat.sarf");
  monet::write_sarf(ratio, g.out_dir + "/ratio.sarf");
  monet::write_quicklook(filtered, g.out_dir + "/xhat");
  monet::write_quicklook(ratio, g.out_dir + "/ratio");
  std::cout << "filtered " << noisy.height << "x" << noisy.width << " image -> "
            << g.out_dir << "/xhat.sarf\n";
  return 0;
}

int cmd_eval(const GlobalArgs& g, const std::string& noisy_path,
             const std::string& filtered_path, const std::string& ref_path) {
  const monet::RunConfig cfg = resolve_config(g);
  const monet::Image<float> noisy = monet::read_image_any(noisy_path);
  const monet::Image<float> filtered = monet::read_image_any(filtered_path);
  std::optional<monet::Image<float>> reference;
  if (!ref_path.empty()) reference = monet::read_image_any(ref_path);
  const monet::MetricsReport rep = monet::evaluate(
      noisy, filtered, reference ? &*reference : nullptr, nullptr, cfg.eval);
  fs::create_directories(g.out_dir);
  write_text(g.out_dir + "/metrics.csv",
             monet::MetricsReport::csv_header() + "\n" + rep.csv_row() + "\n");
  std::cout << rep.pretty();
  return 0;
}

int cmd_detect(const GlobalArgs& g, const std::string& ratio_path,
               const std::string& sar_path) {
  const monet::RunConfig cfg = resolve_config(g);
  const monet::Image<float> ratio = monet::read_image_any(ratio_path);
  const monet::EHMask mask = monet::detect_eh(ratio, cfg.detect);
  fs::create_directories(g.out_dir);
  monet::write_pbm(mask.flags, g.out_dir + "/mask.pbm");

  std::ostringstream csv;
  csv << "row,col,edge_hit,ks_hit\n";
  long flagged = 0;
  for (int y = 0; y < mask.flags.height; ++y)
    for (int x = 0; x < mask.flags.width; ++x)
      if (mask.flags.at(y, x)) {
        const std::uint8_t prov = mask.provenance.at(y, x);
        csv << y << ',' << x << ',' << ((prov & monet::EHMask::kEdgeBit) != 0)
            << ',' << ((prov & monet::EHMask::kKsBit) != 0) << '\n';
        ++flagged;
      }
  write_text(g.out_dir + "/mask.csv", csv.str());
  std::cout << "flagged " << flagged << " of " << mask.flags.size()
            << " pixels\n";

  if (!sar_path.empty()) {
    const monet::Image<float> sar = monet::read_image_any(sar_path);
    const monet::FitReport fit =
        monet::validate_populations(sar, mask, cfg.detect);
    std::ostringstream fit_csv;
    fit_csv << "population,bin_center,empirical,theoretical\n";
    fit_csv.precision(8);
    auto dump = [&fit_csv](const char* name, const monet::PopulationCurve& c) {
      for (std::size_t i = 0; i < c.bin_center.size(); ++i)
        fit_csv << name << ',' << c.bin_center[i] << ',' << c.empirical[i]
                << ',' << c.theoretical[i] << '\n';
    };
    dump("eh", fit.eh_curve);
    dump("h", fit.h_curve);
    write_text(g.out_dir + "/fit.csv", fit_csv.str());
    if (fit.inconclusive)
      std::cout << "population fit: inconclusive (empty population)\n";
    else
      std::cout << "population fit: EH-vs-G_A0 ks " << fit.eh_ks_ga0
                << ", H-vs-K_A ks " << fit.h_ks_ka << "\n";
  }
  return 0;
}

int cmd_ablate(const GlobalArgs& g, const std::string& data_dir) {
  monet::RunConfig cfg = resolve_config(g);
  const monet::Dataset ds = data_dir.empty()
                                ? monet::build_dataset(cfg.dataset)
                                : monet::load_dataset(data_dir);
  const monet::AblationReport report = monet::run_ablation(ds, cfg.train);
  fs::create_directories(g.out_dir);
  write_text(g.out_dir + "/ablation.csv", report.csv());
  for (const auto& v : report.variants) {
    monet::save_monw(v.result.model, g.out_dir + "/model_" + v.name + ".monw");
    write_text(g.out_dir + "/trainlog_" + v.name + ".csv", v.result.log.csv());
  }
  std::cout << report.csv();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAR despeckling toolkit"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "key = value configuration file");
  std::uint64_t seed_arg = 0;
  CLI::Option* seed_opt = app.add_option("--seed", seed_arg, "master seed");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--threads", g.threads, "worker thread count (0 = default)");

  auto* simulate = app.add_subcommand("simulate", "synthesize a patch dataset");
  auto* train = app.add_subcommand("train", "train the despeckling network");
  std::string data_dir, resume_prefix;
  train->add_option("--data", data_dir, "dataset directory (from `simulate`)");
  train->add_option("--resume", resume_prefix, "checkpoint prefix to resume");
  auto* infer = app.add_subcommand("infer", "despeckle one image");
  std::string weights, input;
  infer->add_option("--weights", weights, "MONW weight file")->required();
  infer->add_option("--input", input, "noisy image (SARF/PGM/PPM)")->required();
  auto* eval = app.add_subcommand("eval", "quality metrics for a filtered image");
  std::string noisy_path, filtered_path, ref_path;
  eval->add_option("--noisy", noisy_path, "noisy input image")->required();
  eval->add_option("--filtered", filtered_path, "filtered image")->required();
  eval->add_option("--reference", ref_path, "clean reference (optional)");
  auto* detect = app.add_subcommand("detect", "flag not-fully-developed points");
  std::string ratio_path, sar_path;
  detect->add_option("--ratio", ratio_path, "ratio image")->required();
  detect->add_option("--sar", sar_path, "original SAR image for population fits");
  auto* ablate = app.add_subcommand("ablate", "train the four loss variants");
  std::string ablate_data;
  ablate->add_option("--data", ablate_data, "dataset directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success))
      return app.exit(e);
    app.exit(e);
    return 1;
  }
  if (seed_opt->count() > 0) g.seed = seed_arg;

  try {
    if (simulate->parsed()) return cmd_simulate(g);
    if (train->parsed()) return cmd_train(g, data_dir, resume_prefix);
    if (infer->parsed()) return cmd_infer(g, weights, input);
    if (eval->parsed()) return cmd_eval(g, noisy_path, filtered_path, ref_path);
    if (detect->parsed()) return cmd_detect(g, ratio_path, sar_path);
    if (ablate->parsed()) return cmd_ablate(g, ablate_data);
  } catch (const monet::ParamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const monet::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const monet::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
