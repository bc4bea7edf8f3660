// Command-line front end: simulate, train, oracle, sweep, swarm, report.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "collabnet/collabnet.hpp"

namespace {

using namespace collabnet;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

/// "10" -> indices 0..9; "1,5,9" -> exactly those.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  try {
    if (text.find(',') == std::string::npos) {
      const auto n = std::stoull(text);
      if (n == 0) throw config_error("seeds", "--seeds must be >= 1");
      for (std::uint64_t i = 0; i < n; ++i) seeds.push_back(i);
      return seeds;
    }
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) seeds.push_back(std::stoull(part));
  } catch (const config_error&) {
    throw;
  } catch (const std::exception&) {
    throw config_error("seeds", "--seeds must be a count or a comma-separated list of indices");
  }
  return seeds;
}

std::vector<std::string> expand_policy_args(const std::vector<std::string>& args) {
  std::vector<std::string> specs;
  for (const auto& a : args) {
    std::ifstream probe(a);
    if (probe.good() && a.find(':') == std::string::npos) {
      for (auto& s : read_policy_file(a)) specs.push_back(s);
    } else {
      specs.push_back(a);
    }
  }
  return specs;
}

void write_output(const CsvTable& table, const std::string& path) {
  if (path.empty() || path == "-") {
    emit_csv(table, std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  emit_csv(table, out);
}

struct Common {
  std::string scenario;
  std::string out;
  std::optional<int> bins;
  int episodes = 20000;
  int threads = 1;
};

ScenarioConfig load(const Common& c) {
  auto cfg = load_scenario_file(c.scenario);
  if (c.bins) {
    if (*c.bins < 1) throw config_error("bins", "bins must be ≥ 1");
    cfg.bins = {*c.bins, *c.bins};
  }
  return cfg;
}

void print_aggregates(const MetricsTable& t) {
  std::fprintf(stderr, "%-18s %8s %10s %10s %10s %6s\n", "policy", "quality", "latency_s", "cost", "violations", "n");
  for (const auto& a : t.aggregates) {
    std::fprintf(stderr, "%-18s %8.4f %10.3f %10.5f %10.2f %6d\n", a.policy.c_str(), a.quality(), a.latency(), a.cost(),
                 a.mean[5], a.episodes);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"collabnet: device-cloud routing and multi-agent traffic simulator"};
  app.require_subcommand(1);
  Common c;
  std::vector<std::string> policy_args;
  std::string seeds_text = "10";
  std::string trace_path, returns_path, input_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", c.scenario, "scenario file (JSON)")->required();
    sub->add_option("--out", c.out, "output path ('-' for stdout)");
    sub->add_option("--bins", c.bins, "latency and cost bins for the RL state");
  };

  auto* simulate = app.add_subcommand("simulate", "run one policy over seeded episodes");
  add_common(simulate);
  simulate->add_option("--policy", policy_args, "policy spec or policy file")->required()->expected(1);
  simulate->add_option("--seeds", seeds_text, "seed count or comma-separated seed indices");
  simulate->add_option("--episodes", c.episodes, "training episodes for rl policies");
  simulate->add_option("--trace", trace_path, "per-turn trace CSV");

  auto* train = app.add_subcommand("train", "train the tabular RL router and write its q-table");
  add_common(train);
  train->add_option("--episodes", c.episodes, "training episodes");
  train->add_option("--returns", returns_path, "per-episode return CSV");

  auto* oracle = app.add_subcommand("oracle", "solve a deterministic scenario exactly");
  add_common(oracle);

  auto* sweep = app.add_subcommand("sweep", "run a policy grid across seeds");
  add_common(sweep);
  sweep->add_option("--policy", policy_args, "policy specs or policy files")->required();
  sweep->add_option("--seeds", seeds_text, "seed count or comma-separated seed indices");
  sweep->add_option("--episodes", c.episodes, "training episodes for rl policies");
  sweep->add_option("--threads", c.threads, "worker threads");

  auto* swarm_cmd = app.add_subcommand("swarm", "multi-agent traffic for the scenario's swarm section");
  add_common(swarm_cmd);

  auto* report = app.add_subcommand("report", "Pareto front and summary of a sweep CSV");
  report->add_option("--in", input_path, "sweep CSV")->required();
  report->add_option("--out", c.out, "front CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  PolicyBuildOptions opts;
  opts.train_episodes = c.episodes;

  if (simulate->parsed()) {
    const auto cfg = load(c);
    const auto specs = expand_policy_args(policy_args);
    if (specs.size() != 1) throw config_error("policy", "simulate takes exactly one policy");
    const auto policy = build_policy(specs.front(), cfg, opts);
    std::vector<std::pair<std::uint64_t, EpisodeResult>> episodes;
    MetricsTable table;
    std::vector<const EpisodeMetrics*> rows;
    for (auto seed : parse_seeds(seeds_text)) {
      episodes.emplace_back(seed, run_episode(cfg, policy.policy, seed, policy.id));
      table.rows.push_back(episodes.back().second.metrics);
    }
    for (const auto& r : table.rows) rows.push_back(&r);
    table.aggregates.push_back(aggregate(policy.id, rows));
    write_output(metrics_csv(table), c.out);
    if (!trace_path.empty()) write_output(trace_csv(cfg, episodes), trace_path);
    print_aggregates(table);
  } else if (train->parsed()) {
    const auto cfg = load(c);
    auto params = opts.learning;
    params.bins = cfg.bins;
    const auto result = train_q(cfg, params, c.episodes, derive_seed(cfg.seed, kTrainingStream));
    if (c.out.empty() || c.out == "-") {
      write_qtable(result.table, std::cout);
    } else {
      std::ofstream out(c.out, std::ios::binary);
      if (!out) throw std::runtime_error("cannot open output file " + c.out);
      write_qtable(result.table, out);
    }
    if (!returns_path.empty()) {
      CsvTable csv{{"episode", "return"}, {}};
      for (std::size_t i = 0; i < result.returns.size(); ++i) {
        csv.rows.push_back({std::to_string(i), format_number(result.returns[i])});
      }
      write_output(csv, returns_path);
    }
    const auto greedy = run_episode(cfg, QGreedyPolicy{std::make_shared<const QTable>(result.table), cfg.bins}, 0);
    std::fprintf(stderr, "trained %d episodes, %lld updates; greedy return (seed 0) %.6f\n", c.episodes,
                 static_cast<long long>(result.updates), greedy.metrics.total_quality);
  } else if (oracle->parsed()) {
    const auto cfg = load(c);
    const auto result = dp_optimal(cfg);
    std::ostringstream text;
    if (!result.feasible) {
      text << "infeasible\n";
    } else {
      text << "optimal_value " << format_number(result.value) << "\nstates " << result.states << "\nplan";
      for (const auto& a : result.plan) {
        text << ' ' << cfg.deployment.endpoints[a.endpoint].id;
        if (!a.modalities.empty()) text << '[' << a.modalities.bits() << ']';
      }
      text << '\n';
    }
    if (c.out.empty() || c.out == "-") {
      std::cout << text.str();
    } else {
      std::ofstream out(c.out, std::ios::binary);
      out << text.str();
      if (!out) throw std::runtime_error("cannot write " + c.out);
    }
  } else if (sweep->parsed()) {
    const auto cfg = load(c);
    std::vector<NamedPolicy> policies;
    for (const auto& spec : expand_policy_args(policy_args)) policies.push_back(build_policy(spec, cfg, opts));
    const auto table = run_sweep(cfg, policies, parse_seeds(seeds_text), static_cast<unsigned>(std::max(1, c.threads)));
    write_output(metrics_csv(table), c.out);
    print_aggregates(table);
  } else if (swarm_cmd->parsed()) {
    const auto cfg = load(c);
    if (!cfg.swarm) throw config_error("swarm", "swarm required");
    const auto& s = *cfg.swarm;
    write_output(swarm_csv(run_swarm_scenario(s)), c.out);
    Rng rng(derive_seed(cfg.seed, 0x5A));
    for (auto kind : s.topologies) {
      const auto topo = swarm::build_topology(kind, s.agents, s.params);
      const auto q = swarm::mean_collective_quality(topo, s.rounds, s.length, s.insights, s.trials, rng);
      const auto traffic = swarm::run_debate(topo, s.rounds, s.length, s.timing);
      std::fprintf(stderr, "%-7s tokens=%lld quality=%.4f (se %.4f)\n", swarm::to_string(kind).c_str(),
                   static_cast<long long>(traffic.total_tokens), q.mean_quality, q.std_error);
    }
  } else if (report->parsed()) {
    std::ifstream in(input_path);
    if (!in) throw std::runtime_error("cannot open " + input_path);
    const auto csv = read_csv(in);
    auto col = [&](const std::string& name) {
      auto it = std::find(csv.header.begin(), csv.header.end(), name);
      if (it == csv.header.end()) throw config_error(name, "input CSV lacks column " + name);
      return static_cast<std::size_t>(it - csv.header.begin());
    };
    const auto pc = col("policy"), sc = col("seed"), qc = col("mean_quality"), lc = col("latency_s"), cc = col("cost");
    std::vector<std::string> names;
    std::vector<TradeoffPoint> points;
    for (const auto& row : csv.rows) {
      if (row.at(sc) != "mean") continue;
      names.push_back(row.at(pc));
      points.push_back({std::stod(row.at(qc)), std::stod(row.at(lc)), std::stod(row.at(cc))});
    }
    const auto front = pareto_front(points);
    CsvTable out{{"policy", "mean_quality", "latency_s", "cost", "on_front"}, {}};
    for (std::size_t i = 0; i < points.size(); ++i) {
      const bool on = std::find(front.begin(), front.end(), i) != front.end();
      out.rows.push_back({names[i], format_number(points[i].quality), format_number(points[i].latency),
                          format_number(points[i].cost), on ? "1" : "0"});
    }
    write_output(out, c.out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const collabnet::config_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const collabnet::parse_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
