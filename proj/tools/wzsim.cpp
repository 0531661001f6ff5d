// wzsim: work-zone merge control simulator and SAC trainer CLI.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wz/experiments.hpp"
#include "wz/ppm.hpp"
#include "wz/trainer.hpp"

namespace {

namespace fs = std::filesystem;

wz::Config load_config(const std::string& path) {
  if (path.empty()) return wz::Config();
  return wz::Config::from_file(path);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

struct TrajRecord {
  double time;
  int id;
  int lane;
  double pos;
  double speed;
  double accel;
  int lane_change;
};

std::vector<TrajRecord> read_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectories: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<TrajRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TrajRecord r{};
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    ss >> r.time >> r.id >> r.lane >> r.pos >> r.speed >> r.accel >> r.lane_change;
    out.push_back(r);
  }
  return out;
}

std::vector<std::uint64_t> seed_list(long first, long count) {
  std::vector<std::uint64_t> seeds;
  for (long i = 0; i < count; ++i) seeds.push_back(static_cast<std::uint64_t>(first + i));
  return seeds;
}

int cmd_simulate(const std::string& config_path, const std::string& strategy, double demand,
                 long first_seed, long num_seeds, double duration, double warmup,
                 const std::string& checkpoint, const std::string& out_dir, bool trajectories,
                 bool density) {
  wz::Config cfg = load_config(config_path);
  wz::RunConfig run;
  run.strategy = wz::strategy_kind_from_string(strategy);
  run.demand_vph = demand;
  run.seeds = seed_list(first_seed, num_seeds);
  run.duration_s = duration;
  run.warmup_s = warmup;
  run.checkpoint = checkpoint;

  fs::create_directories(out_dir);
  wz::RunArtifacts artifacts;
  if (trajectories) artifacts.trajectories_path = out_dir + "/trajectories.csv";
  artifacts.want_density = density;

  wz::MetricsSummary summary = wz::run_experiment(cfg, run, &artifacts);
  nlohmann::json j = wz::metrics_to_json(summary);
  j["strategy"] = wz::strategy_name(run.strategy);
  j["demand_vph"] = run.demand_vph;
  write_json(out_dir + "/metrics.json", j);
  if (density) {
    std::ofstream d(out_dir + "/density.csv");
    artifacts.density.to_csv(d);
  }
  std::cout << j.dump(2) << std::endl;
  return 0;
}

int cmd_train(const std::string& config_path, long budget, const std::string& out_dir,
              long seed) {
  wz::Config cfg = load_config(config_path);
  wz::TrainConfig tc = wz::TrainConfig::from_config(cfg);
  if (budget >= 0) tc.budget_env_steps = budget;
  if (!out_dir.empty()) tc.out_dir = out_dir;
  if (seed >= 0) tc.seed = static_cast<std::uint64_t>(seed);
  wz::Trainer trainer(tc);
  wz::TrainResult result = trainer.run();
  nlohmann::json j{{"checkpoint", result.checkpoint_path},
                   {"env_steps", result.env_steps},
                   {"updates", result.updates},
                   {"episodes", result.episodes.size()},
                   {"crashes", result.crashes}};
  if (!result.episodes.empty()) {
    double mean_ret = 0.0;
    for (const auto& e : result.episodes) mean_ret += e.ret;
    j["mean_return"] = mean_ret / result.episodes.size();
  }
  write_json(tc.out_dir + "/train_summary.json", j);
  std::cout << j.dump(2) << std::endl;
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& checkpoint, double demand,
                 long first_seed, long num_seeds, double duration, double warmup,
                 const std::string& out_dir) {
  return cmd_simulate(config_path, "rl", demand, first_seed, num_seeds, duration, warmup,
                      checkpoint, out_dir, false, false);
}

int cmd_compare(const std::string& config_path, const std::string& strategies_csv,
                const std::string& demands_csv, long first_seed, long num_seeds,
                const std::string& checkpoint, const std::string& out_dir) {
  wz::Config cfg = load_config(config_path);
  std::vector<wz::StrategyKind> strategies;
  {
    std::istringstream ss(strategies_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) strategies.push_back(wz::strategy_kind_from_string(tok));
  }
  std::vector<double> demands;
  {
    std::istringstream ss(demands_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) demands.push_back(std::stod(tok));
  }
  fs::create_directories(out_dir);
  nlohmann::json report =
      wz::compare_strategies(cfg, strategies, demands, seed_list(first_seed, num_seeds),
                             checkpoint);
  write_json(out_dir + "/comparison.json", report);

  // text table
  for (auto& [dkey, cells] : report.items()) {
    std::cout << "\n== demand " << dkey << " ==\n";
    std::cout << "strategy        delay(s)   throughput(vph)   travel_time(s)\n";
    for (auto& [name, cell] : cells.items()) {
      auto& mean = cell["mean"];
      std::cout << name;
      for (std::size_t k = name.size(); k < 16; ++k) std::cout << ' ';
      std::cout << mean["avg_delay_s"].get<double>() << "   "
                << mean["throughput_vph"].get<double>() << "   "
                << mean["mean_travel_time_s"].get<double>();
      if (cell.contains("relative_to_base_pct")) {
        std::cout << "   (delay " << cell["relative_to_base_pct"]["avg_delay_s"].get<double>()
                  << "%, throughput "
                  << cell["relative_to_base_pct"]["throughput_vph"].get<double>() << "%)";
      }
      std::cout << '\n';
    }
  }
  return 0;
}

int cmd_plot_density(const std::string& traj_path, double time_bin, double dist_bin,
                     const std::string& out_csv, const std::string& image) {
  auto records = read_trajectories(traj_path);
  double max_t = 0.0, max_x = 0.0;
  for (const auto& r : records) {
    max_t = std::max(max_t, r.time);
    max_x = std::max(max_x, r.pos);
  }
  int rows = static_cast<int>(max_t / time_bin) + 1;
  int cols = static_cast<int>(max_x / dist_bin) + 1;
  std::vector<double> counts[2];
  counts[0].assign(static_cast<std::size_t>(rows) * cols, 0.0);
  counts[1].assign(static_cast<std::size_t>(rows) * cols, 0.0);
  std::vector<std::map<long, int>> dummy;
  // distinct sample times per row normalize the per-step counts
  std::map<long, std::map<long, int>> times_in_row;
  for (const auto& r : records) {
    long row = static_cast<long>(r.time / time_bin);
    times_in_row[row][static_cast<long>(r.time * 1000.0)] = 1;
  }
  for (const auto& r : records) {
    int row = static_cast<int>(r.time / time_bin);
    int col = static_cast<int>(r.pos / dist_bin);
    if (r.lane >= 0 && r.lane < 2 && row < rows && col >= 0 && col < cols)
      counts[r.lane][static_cast<std::size_t>(row) * cols + col] += 1.0;
  }
  wz::DensityMap m;
  m.time_bin = time_bin;
  m.dist_bin = dist_bin;
  m.rows = rows;
  m.cols = cols;
  for (int l = 0; l < 2; ++l) {
    m.lane[l].assign(static_cast<std::size_t>(rows) * cols, 0.0);
    for (int r = 0; r < rows; ++r) {
      auto it = times_in_row.find(r);
      int steps = it == times_in_row.end() ? 0 : static_cast<int>(it->second.size());
      if (steps == 0) continue;
      for (int c = 0; c < cols; ++c)
        m.lane[l][static_cast<std::size_t>(r) * cols + c] =
            counts[l][static_cast<std::size_t>(r) * cols + c] / steps * (1000.0 / dist_bin);
    }
  }
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write " + out_csv);
  m.to_csv(out);

  if (!image.empty()) {
    double dmax = 1.0;
    for (int l = 0; l < 2; ++l)
      for (double v : m.lane[l]) dmax = std::max(dmax, v);
    wz::PpmImage img(cols * 2 + 4, rows);
    for (int l = 0; l < 2; ++l) {
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          std::uint8_t cr, cg, cb;
          wz::heat_color(m.at(l, r, c) / dmax, cr, cg, cb);
          img.set(l * (cols + 4) + c, rows - 1 - r, cr, cg, cb);
        }
      }
    }
    img.save(image);
  }
  std::cout << "density matrix " << rows << "x" << cols << " written to " << out_csv << std::endl;
  return 0;
}

int cmd_plot_trajectories(const std::string& traj_path, const std::string& image, double t0,
                          double t1) {
  auto records = read_trajectories(traj_path);
  if (records.empty()) throw std::runtime_error("no trajectory records");
  double max_t = 0.0, max_x = 0.0;
  for (const auto& r : records) {
    max_t = std::max(max_t, r.time);
    max_x = std::max(max_x, r.pos);
  }
  if (t1 <= 0.0) t1 = max_t;
  int W = 1200, H = 800;
  wz::PpmImage img(W, H);
  std::map<int, TrajRecord> last;
  for (const auto& r : records) {
    if (r.time < t0 || r.time > t1) continue;
    auto it = last.find(r.id);
    if (it != last.end()) {
      auto px = [&](const TrajRecord& q) {
        int x = static_cast<int>((q.time - t0) / (t1 - t0) * (W - 1));
        int y = H - 1 - static_cast<int>(q.pos / max_x * (H - 1));
        return std::pair<int, int>(x, y);
      };
      auto [x0, y0] = px(it->second);
      auto [x1, y1] = px(r);
      // closed lane green, open lane red (trajectory turns red at the merge)
      if (r.lane == 1) {
        img.line(x0, y0, x1, y1, 0, 160, 0);
      } else {
        img.line(x0, y0, x1, y1, 200, 0, 0);
      }
    }
    last[r.id] = r;
  }
  img.save(image);
  std::cout << "trajectory diagram written to " << image << std::endl;
  return 0;
}

int cmd_plot_accel(const std::string& traj_path, const std::string& out_csv,
                   const std::string& image, double warmup) {
  auto records = read_trajectories(traj_path);
  double lo = -9.0, hi = 4.0, bw = 0.25;
  int nb = static_cast<int>((hi - lo) / bw);
  std::vector<long> bins(nb, 0);
  long total = 0;
  for (const auto& r : records) {
    if (r.time < warmup) continue;
    int b = static_cast<int>((std::clamp(r.accel, lo, hi - 1e-9) - lo) / bw);
    bins[b] += 1;
    ++total;
  }
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write " + out_csv);
  out << "accel_lo,accel_hi,count\n";
  for (int i = 0; i < nb; ++i) out << lo + i * bw << ',' << lo + (i + 1) * bw << ',' << bins[i] << '\n';

  if (!image.empty()) {
    long peak = 1;
    for (long c : bins) peak = std::max(peak, c);
    int W = nb * 8, H = 400;
    wz::PpmImage img(W, H);
    for (int i = 0; i < nb; ++i) {
      int h = static_cast<int>(static_cast<double>(bins[i]) / peak * (H - 20));
      for (int x = i * 8; x < i * 8 + 7; ++x)
        for (int y = H - 1; y >= H - 1 - h; --y) img.set(x, y, 60, 60, 200);
    }
    img.save(image);
  }
  std::cout << "acceleration histogram (" << total << " samples) written to " << out_csv
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"work-zone merge control: microsimulation, SAC training, evaluation"};
  app.require_subcommand(1);

  std::string config_path, strategy = "base", checkpoint, out_dir = "out";
  std::string traj_path, out_csv, image;
  double demand = 1600.0, duration = 2700.0, warmup = 900.0;
  long first_seed = 1, num_seeds = 1, budget = -1, seed = -1;
  double time_bin = 10.0, dist_bin = 10.0, t0 = 0.0, t1 = 0.0;
  std::string strategies_csv = "base,early,late", demands_csv = "1600";

  auto* sim = app.add_subcommand("simulate", "run one strategy over seeds and report metrics");
  sim->add_option("--config", config_path, "key=value config file");
  sim->add_option("--strategy", strategy, "base|early|late|rl");
  sim->add_option("--demand", demand, "veh/h");
  sim->add_option("--seed", first_seed, "first seed");
  sim->add_option("--num-seeds", num_seeds, "seed count");
  sim->add_option("--duration", duration, "s");
  sim->add_option("--warmup", warmup, "s");
  sim->add_option("--checkpoint", checkpoint, "policy checkpoint (rl)");
  sim->add_option("--out", out_dir, "output directory");
  bool want_traj = false, want_density = false;
  sim->add_flag("--trajectories", want_traj, "write per-step trajectories.csv (first seed)");
  sim->add_flag("--density", want_density, "write density.csv (first seed)");

  auto* train = app.add_subcommand("train", "train the SAC merge policy");
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--budget", budget, "environment steps (control ticks)");
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--seed", seed, "training seed");

  auto* eval = app.add_subcommand("evaluate", "evaluate a trained checkpoint");
  eval->add_option("--config", config_path, "key=value config file");
  eval->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
  eval->add_option("--demand", demand, "veh/h");
  eval->add_option("--seed", first_seed, "first seed");
  eval->add_option("--num-seeds", num_seeds, "seed count");
  eval->add_option("--duration", duration, "s");
  eval->add_option("--warmup", warmup, "s");
  eval->add_option("--out", out_dir, "output directory");

  auto* cmp = app.add_subcommand("compare", "strategy x demand comparison table");
  cmp->add_option("--config", config_path, "key=value config file");
  cmp->add_option("--strategies", strategies_csv, "comma list: base,early,late,rl");
  cmp->add_option("--demands", demands_csv, "comma list of veh/h");
  cmp->add_option("--seed", first_seed, "first seed");
  cmp->add_option("--num-seeds", num_seeds, "seed count");
  cmp->add_option("--checkpoint", checkpoint, "policy checkpoint (rl)");
  cmp->add_option("--out", out_dir, "output directory");

  auto* pd = app.add_subcommand("plot-density", "density matrix from a trajectories CSV");
  pd->add_option("--trajectories", traj_path, "trajectories.csv")->required();
  pd->add_option("--time-bin", time_bin, "s");
  pd->add_option("--dist-bin", dist_bin, "m");
  pd->add_option("--out", out_csv, "output CSV")->required();
  pd->add_option("--image", image, "optional PPM heatmap");

  auto* pt = app.add_subcommand("plot-trajectories", "time-space diagram from a trajectories CSV");
  pt->add_option("--trajectories", traj_path, "trajectories.csv")->required();
  pt->add_option("--out", image, "output PPM")->required();
  pt->add_option("--from", t0, "start time s");
  pt->add_option("--to", t1, "end time s");

  auto* pa = app.add_subcommand("plot-accel", "acceleration histogram from a trajectories CSV");
  pa->add_option("--trajectories", traj_path, "trajectories.csv")->required();
  pa->add_option("--out", out_csv, "output CSV")->required();
  pa->add_option("--image", image, "optional PPM bars");
  pa->add_option("--warmup", warmup, "discard records before this time");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(config_path, strategy, demand, first_seed, num_seeds, duration, warmup,
                          checkpoint, out_dir, want_traj, want_density);
    if (train->parsed()) return cmd_train(config_path, budget, out_dir, seed);
    if (eval->parsed())
      return cmd_evaluate(config_path, checkpoint, demand, first_seed, num_seeds, duration,
                          warmup, out_dir);
    if (cmp->parsed())
      return cmd_compare(config_path, strategies_csv, demands_csv, first_seed, num_seeds,
                         checkpoint, out_dir);
    if (pd->parsed()) return cmd_plot_density(traj_path, time_bin, dist_bin, out_csv, image);
    if (pt->parsed()) return cmd_plot_trajectories(traj_path, image, t0, t1);
    if (pa->parsed()) return cmd_plot_accel(traj_path, out_csv, image, 0.0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
