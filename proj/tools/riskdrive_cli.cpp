#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "riskdrive/checkpoint.hpp"
#include "riskdrive/config.hpp"
#include "riskdrive/errors.hpp"
#include "riskdrive/export.hpp"
#include "riskdrive/harness.hpp"
#include "riskdrive/risk_field.hpp"
#include "riskdrive/safety.hpp"

namespace fs = std::filesystem;
using namespace riskdrive;

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::vector<std::string>& items) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      std::size_t used = 0;
      std::uint64_t v = 0;
      try {
        v = std::stoull(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw ConfigError("--seeds", "'" + tok + "' is not a seed");
      seeds.push_back(v);
    }
  }
  if (seeds.empty()) throw ConfigError("--seeds", "at least one seed is required");
  return seeds;
}

void print_report(const EvalReport& r, std::ostream& out) {
  out << "episodes," << r.episodes << '\n'
      << "mean_reward," << format_double(r.mean_reward) << '\n'
      << "mean_speed," << format_double(r.mean_speed) << '\n'
      << "speed_variance," << format_double(r.speed_variance) << '\n'
      << "collision_rate," << format_double(r.collision_rate) << '\n'
      << "wall_time," << format_double(r.wall_time) << '\n';
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

int run_riskmap(const fs::path& scene_path, const fs::path& out_dir) {
  const Scene scene = load_scene(scene_path);
  fs::create_directories(out_dir);
  std::ostringstream sidecar;
  sidecar << "# 8-bit PGM, gray = round(255 * value / scale_max), highest-y row on top\n"
          << "field,scale_max\n";
  const struct {
    const char* name;
    FieldKind kind;
  } fields[] = {{"static", FieldKind::static_field},
                {"dynamic", FieldKind::dynamic_field},
                {"hybrid", FieldKind::hybrid}};
  for (const auto& f : fields) {
    const RiskGrid g = rasterize_field(scene.av, scene.hdvs, scene.risk, scene.grid, f.kind);
    std::ofstream csv(out_dir / (std::string(f.name) + ".csv"), std::ios::binary);
    write_grid_csv(g, csv);
    std::ofstream pgm(out_dir / (std::string(f.name) + ".pgm"), std::ios::binary);
    const double scale = write_grid_pgm(g, pgm);
    sidecar << f.name << ',' << format_double(scale) << '\n';
    if (!csv || !pgm) throw std::runtime_error("cannot write rasters to " + out_dir.string());
  }
  write_file(out_dir / "scaling.txt", sidecar.str());
  std::cout << "wrote static, dynamic and hybrid rasters to " << out_dir.string() << '\n';
  return 0;
}

int run_certify(const fs::path& scene_path, int lane, const std::string& out_dir,
                double r_safe_override) {
  const Scene scene = load_scene(scene_path);
  SafetyConfig safety = scene.safety;
  if (r_safe_override > 0.0) safety.r_safe = r_safe_override;
  const LaneChangePlan plan = evaluate_lane_change(scene.world(), lane, safety);

  std::ostringstream csv;
  csv << "t,x,y,static_risk,dynamic_risk,cumulative\n";
  double cumulative = 0.0;
  const RiskParams& p = safety.risk;
  for (std::size_t i = 0; i < plan.samples.size(); ++i) {
    const auto& s = plan.samples[i];
    const auto& r = plan.per_point_risk[i];
    cumulative += p.w_s * r.static_risk + p.w_d * r.dynamic_risk;
    csv << format_double(s.t) << ',' << format_double(s.x) << ',' << format_double(s.y) << ','
        << format_double(r.static_risk) << ',' << format_double(r.dynamic_risk) << ','
        << format_double(cumulative) << '\n';
  }
  std::ostringstream verdict;
  verdict << (plan.certified ? "certified" : "rejected") << " lane " << scene.av.lane << " -> "
          << lane << " r_total=" << format_double(plan.r_total)
          << " r_safe=" << format_double(plan.r_safe) << '\n';
  if (out_dir.empty()) {
    std::cout << csv.str();
    std::cerr << verdict.str();
  } else {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "certify.csv", csv.str());
    std::cout << verdict.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-aware lane-change training and analysis"};
  app.require_subcommand(1);

  std::string config_path, variant_name = "ribppo-s", out_dir, checkpoint_path, scene_path;
  std::uint64_t seed = 0;
  int episodes = 100, lane = 0;
  bool quiet = false;
  double r_safe = 0.0;
  std::vector<std::string> seed_items, variant_items;

  auto* train_cmd = app.add_subcommand("train", "Train one variant");
  train_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  train_cmd->add_option("--variant", variant_name, "ppo, bppo, rppo, ppo-s or ribppo-s");
  train_cmd->add_option("--seed", seed, "Root seed")->required();
  train_cmd->add_option("--out", out_dir, "Output directory")->required();
  train_cmd->add_flag("--quiet", quiet, "No per-iteration progress");

  auto* eval_cmd = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint.bin")->required();
  eval_cmd->add_option("--episodes", episodes, "Episode count")->required()->check(
      CLI::PositiveNumber);
  eval_cmd->add_option("--seed", seed, "Evaluation seed")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate every variant per seed");
  ablate_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  ablate_cmd->add_option("--seeds", seed_items, "Seeds, comma separated")->required();
  ablate_cmd->add_option("--out", out_dir, "Output directory")->required();
  ablate_cmd->add_option("--variants", variant_items, "Restrict to these variants");
  ablate_cmd->add_flag("--quiet", quiet, "No progress output");

  auto* riskmap_cmd = app.add_subcommand("riskmap", "Rasterize the risk fields of a scene");
  riskmap_cmd->add_option("--scene", scene_path, "Scene file (JSON)")->required();
  riskmap_cmd->add_option("--out", out_dir, "Output directory")->required();

  auto* certify_cmd = app.add_subcommand("certify", "Certify a lane change in a scene");
  certify_cmd->add_option("--scene", scene_path, "Scene file (JSON)")->required();
  certify_cmd->add_option("--lane", lane, "Target lane")->required();
  certify_cmd->add_option("--out", out_dir, "Write certify.csv here instead of stdout");
  certify_cmd->add_option("--r-safe", r_safe, "Override the scene's r_safe");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const ExperimentConfig cfg = load_config(config_path);
      const Variant v = Variant::parse(variant_name);
      TrainOptions opt;
      opt.out_dir = out_dir;
      opt.log = quiet ? nullptr : &std::cerr;
      const TrainResult r = train(cfg, v, seed, opt);
      std::cout << "variant," << v.name() << "\nseed," << seed << '\n';
      print_report(r.final_eval, std::cout);
    } else if (*eval_cmd) {
      const Checkpoint ck = load_checkpoint(checkpoint_path);
      print_report(evaluate(ck, episodes, seed), std::cout);
    } else if (*ablate_cmd) {
      const ExperimentConfig cfg = load_config(config_path);
      const auto seeds = parse_seed_list(seed_items);
      std::vector<std::string> variants;
      for (const auto& item : variant_items) {
        std::stringstream ss(item);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          if (!tok.empty()) variants.push_back(tok);
        }
      }
      if (variants.empty()) variants = Variant::all_names();
      fs::create_directories(out_dir);
      const auto rows = ablate(cfg, seeds, variants, out_dir, quiet ? nullptr : &std::cerr);
      std::ofstream csv(fs::path(out_dir) / "ablation.csv", std::ios::binary);
      write_ablation_csv(rows, csv);
      if (!csv) throw std::runtime_error("cannot write ablation.csv");
      std::cout << "wrote " << (fs::path(out_dir) / "ablation.csv").string() << '\n';
    } else if (*riskmap_cmd) {
      return run_riskmap(scene_path, out_dir);
    } else if (*certify_cmd) {
      return run_certify(scene_path, lane, out_dir, r_safe);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const CompatibilityError& e) {
    std::cerr << "incompatible checkpoint: " << e.what() << '\n';
    return 3;
  } catch (const InvalidManeuver& e) {
    std::cerr << "invalid maneuver: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
