#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gridlight/config.hpp"
#include "gridlight/env.hpp"
#include "gridlight/flows.hpp"
#include "gridlight/netmodel_io.hpp"
#include "gridlight/trainer.hpp"

namespace fs = std::filesystem;
using namespace gridlight;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitFault = 3;

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoull(item));
    }
    return out;
}

void apply_worker_override(ExperimentConfig& cfg) {
    if (const char* env = std::getenv("GRIDLIGHT_WORKERS")) {
        const int workers = std::atoi(env);
        if (workers >= 1) cfg.train.workers = workers;
    }
}

void write_metrics_csv(const std::string& path, const EvalTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "episode,seed,avg_queue,avg_speed,avg_int_delay,avg_cum_delay,avg_trip_time,entered,exited\n";
    int episode = 0;
    for (const auto& row : table.rows) {
        out << episode++ << "," << row.seed << "," << fmt(row.metrics.avg_queue_length) << ","
            << fmt(row.metrics.avg_speed_mps) << "," << fmt(row.metrics.avg_intersection_delay_s) << ","
            << fmt(row.metrics.avg_cumulative_delay_s) << "," << fmt_opt(row.metrics.avg_trip_time_s) << ","
            << row.metrics.entered << "," << row.metrics.exited << "\n";
    }
}

nlohmann::json summary_json(const EvalTable& table) {
    nlohmann::json j;
    j["scenarios"] = table.rows.size();
    j["mean_return"] = {{"mean", table.mean_return}, {"std", table.std_return}};
    j["avg_queue"] = {{"mean", table.mean.avg_queue_length}, {"std", table.stddev.avg_queue_length}};
    j["avg_speed"] = {{"mean", table.mean.avg_speed_mps}, {"std", table.stddev.avg_speed_mps}};
    j["avg_int_delay"] = {{"mean", table.mean.avg_intersection_delay_s},
                          {"std", table.stddev.avg_intersection_delay_s}};
    j["avg_cum_delay"] = {{"mean", table.mean.avg_cumulative_delay_s},
                          {"std", table.stddev.avg_cumulative_delay_s}};
    if (table.mean.avg_trip_time_s) {
        j["avg_trip_time"] = {{"mean", *table.mean.avg_trip_time_s},
                              {"std", table.stddev.avg_trip_time_s.value_or(0.0)}};
    } else {
        j["avg_trip_time"] = nullptr;
    }
    return j;
}

std::string mean_std_cell(double mean, double stddev) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << mean << " (" << stddev << ")";
    return os.str();
}

struct CurvePoint {
    double mean_return = 0.0;
    double avg_speed = 0.0;
    double avg_int_delay = 0.0;
};

// Pulls per-episode training curves back out of a run's NDJSON log.
std::map<long, CurvePoint> read_training_curves(const std::string& log_path) {
    std::ifstream in(log_path);
    if (!in) throw std::runtime_error("cannot open " + log_path);
    std::map<long, CurvePoint> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.value("type", "") != "train") continue;
        CurvePoint p;
        p.mean_return = j.value("mean_return", 0.0);
        p.avg_speed = j.value("avg_speed", 0.0);
        p.avg_int_delay = j.value("avg_int_delay", 0.0);
        out[j.at("episode").get<long>()] = p;
    }
    return out;
}

int cmd_gen_net(const std::string& out_path, int rows, int cols) {
    TrafficNetwork net = build_grid_network(rows, cols);
    save_network(net, out_path);
    std::cout << "wrote " << rows << "x" << cols << " grid network to " << out_path << "\n";
    return kExitOk;
}

int cmd_gen_flows(const std::string& net_path, int rows, int cols, double rate, double horizon, std::uint64_t seed,
                  const std::string& out_path) {
    TrafficNetwork net = net_path.empty() ? build_grid_network(rows, cols) : load_network(net_path);
    FlowSpec spec = generate_flows(net, rate, horizon, seed);
    save_flows(spec, out_path);
    std::cout << spec.trips.size() << " trips -> " << out_path << "\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, const std::string& resume) {
    ExperimentConfig cfg = load_config(config_path);
    apply_worker_override(cfg);
    Trainer trainer(cfg);
    TrainOutcome outcome = trainer.train(out_dir, resume);
    std::cout << "trained " << outcome.episodes_completed << " episode(s); log: " << outcome.log_path
              << "; final checkpoint: " << outcome.final_checkpoint_path << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint_path, const std::string& controller,
             const std::string& scenarios, const std::string& out_prefix) {
    ExperimentConfig cfg = load_config(config_path);
    const std::vector<std::uint64_t> seeds = scenarios.empty() ? cfg.train.eval_seeds : parse_seed_list(scenarios);
    if (seeds.empty()) throw std::runtime_error("no evaluation scenarios given");
    for (std::uint64_t s : seeds) {
        if (std::find(cfg.train.train_seeds.begin(), cfg.train.train_seeds.end(), s) != cfg.train.train_seeds.end()) {
            throw std::invalid_argument("eval: scenario seed " + std::to_string(s) +
                                        " is a training seed; evaluation seeds must be held out");
        }
    }

    TrafficNetwork net = build_grid_network(cfg.network.rows, cfg.network.cols, cfg.network.links,
                                            cfg.network.phase_table);
    EvalTable table;
    if (!checkpoint_path.empty()) {
        Checkpoint ck = load_checkpoint(checkpoint_path);
        const std::string expect = config_compat_hash(cfg);
        if (ck.config_hash != expect) {
            std::cerr << "refusing to evaluate: checkpoint was trained under config hash " << ck.config_hash
                      << " but this config hashes to " << expect
                      << " (network geometry, phase table, observation schema, network sizes and mode must match)\n";
            return kExitFault;
        }
        table = evaluate_policy(cfg, net, ck.actor, seeds);
    } else {
        const std::string name = controller.empty() ? cfg.controller.type : controller;
        if (name == "policy") throw std::invalid_argument("eval: controller 'policy' needs --checkpoint");
        FixedTimePlan plan{cfg.controller.plan};
        table = evaluate_controller(cfg, net, controller_kind_from_string(name), seeds, plan);
    }

    const std::string csv_path = out_prefix + ".csv";
    const std::string summary_path = out_prefix + ".summary.json";
    write_metrics_csv(csv_path, table);
    std::ofstream summary(summary_path);
    summary << summary_json(table).dump(2) << "\n";
    std::ofstream resolved(out_prefix + ".config.json");
    resolved << config_to_json(cfg).dump(2) << "\n";
    std::cout << "evaluated " << table.rows.size() << " scenario(s) -> " << csv_path << ", " << summary_path << "\n";
    return kExitOk;
}

int cmd_compare(const std::string& config_path, const std::string& methods_csv, const std::string& out_dir) {
    ExperimentConfig base = load_config(config_path);
    apply_worker_override(base);
    fs::create_directories(out_dir);

    std::vector<std::string> methods;
    {
        std::stringstream ss(methods_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) methods.push_back(item);
        }
    }
    if (methods.empty()) throw std::runtime_error("no methods given");

    const std::vector<std::string> learned = {"sociallight", "raw_coma", "a3c_local", "a3c_neighborhood"};
    const std::vector<std::string> classical = {"fixed_time", "greedy", "max_pressure"};
    for (const auto& m : methods) {
        if (std::find(learned.begin(), learned.end(), m) == learned.end() &&
            std::find(classical.begin(), classical.end(), m) == classical.end()) {
            throw CLI::ValidationError("--methods", "unknown method '" + m + "'");
        }
    }

    TrafficNetwork net = build_grid_network(base.network.rows, base.network.cols, base.network.links,
                                            base.network.phase_table);

    std::map<std::string, std::map<long, CurvePoint>> curves;
    std::map<std::string, EvalTable> tables;
    for (const auto& method : methods) {
        if (std::find(classical.begin(), classical.end(), method) != classical.end()) {
            tables[method] = evaluate_controller(base, net, controller_kind_from_string(method), base.train.eval_seeds);
            std::cout << method << ": evaluated (no training)\n";
            continue;
        }
        ExperimentConfig cfg = base;
        cfg.advantage.mode = advantage_mode_from_string(method);
        Trainer trainer(cfg);
        const std::string run_dir = (fs::path(out_dir) / method).string();
        TrainOutcome outcome = trainer.train(run_dir);
        curves[method] = read_training_curves(outcome.log_path);
        Checkpoint ck = load_checkpoint(outcome.final_checkpoint_path);
        tables[method] = evaluate_policy(cfg, net, ck.actor, cfg.train.eval_seeds);
        std::cout << method << ": trained " << outcome.episodes_completed << " episode(s)\n";
    }

    // per-episode curve files share one episode axis
    if (!curves.empty()) {
        auto write_curve = [&](const std::string& name, auto getter) {
            std::ofstream out((fs::path(out_dir) / (name + ".csv")).string());
            out << "episode";
            for (const auto& [method, _] : curves) out << "," << method;
            out << "\n";
            for (long e = 0; e < base.train.episodes; ++e) {
                out << e;
                for (const auto& [method, points] : curves) {
                    auto it = points.find(e);
                    out << "," << (it == points.end() ? std::string() : fmt(getter(it->second)));
                }
                out << "\n";
            }
        };
        write_curve("curve_mean_return", [](const CurvePoint& p) { return p.mean_return; });
        write_curve("curve_avg_speed", [](const CurvePoint& p) { return p.avg_speed; });
        write_curve("curve_avg_int_delay", [](const CurvePoint& p) { return p.avg_int_delay; });
    }

    // final comparison table, metric columns in the standard reporting order
    std::ofstream table_out((fs::path(out_dir) / "comparison.csv").string());
    table_out << "method,queue_length,speed_mps,intersection_delay_s,cumulative_delay_s,trip_time_s\n";
    for (const auto& method : methods) {
        const EvalTable& t = tables.at(method);
        table_out << method << "," << mean_std_cell(t.mean.avg_queue_length, t.stddev.avg_queue_length) << ","
                  << mean_std_cell(t.mean.avg_speed_mps, t.stddev.avg_speed_mps) << ","
                  << mean_std_cell(t.mean.avg_intersection_delay_s, t.stddev.avg_intersection_delay_s) << ","
                  << mean_std_cell(t.mean.avg_cumulative_delay_s, t.stddev.avg_cumulative_delay_s) << ","
                  << (t.mean.avg_trip_time_s
                          ? mean_std_cell(*t.mean.avg_trip_time_s, t.stddev.avg_trip_time_s.value_or(0.0))
                          : std::string())
                  << "\n";
    }
    std::cout << "comparison written to " << out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gridlight: queue-based grid traffic control laboratory"};
    app.require_subcommand(1);

    auto* gen_net = app.add_subcommand("gen-net", "write a grid network file");
    std::string gn_out = "network.json";
    int gn_rows = 3, gn_cols = 3;
    gen_net->add_option("--rows", gn_rows, "grid rows")->check(CLI::PositiveNumber);
    gen_net->add_option("--cols", gn_cols, "grid cols")->check(CLI::PositiveNumber);
    gen_net->add_option("--out", gn_out, "output path")->required();

    auto* gen_flows = app.add_subcommand("gen-flows", "generate a synthetic traffic flow file");
    std::string gf_net, gf_out = "flows.json";
    int gf_rows = 3, gf_cols = 3;
    double gf_rate = 0.5, gf_horizon = 3600.0;
    std::uint64_t gf_seed = 1;
    gen_flows->add_option("--net", gf_net, "network file (omit to use --rows/--cols grid)");
    gen_flows->add_option("--rows", gf_rows, "grid rows when no --net is given")->check(CLI::PositiveNumber);
    gen_flows->add_option("--cols", gf_cols, "grid cols when no --net is given")->check(CLI::PositiveNumber);
    gen_flows->add_option("--rate", gf_rate, "arrival rate, vehicles/second")->check(CLI::PositiveNumber);
    gen_flows->add_option("--horizon", gf_horizon, "horizon in seconds")->check(CLI::PositiveNumber);
    gen_flows->add_option("--seed", gf_seed, "generator seed");
    gen_flows->add_option("--out", gf_out, "output path")->required();

    auto* train = app.add_subcommand("train", "train per the experiment config");
    std::string tr_config, tr_out = "run", tr_resume;
    train->add_option("--config", tr_config, "experiment config (JSON)")->required();
    train->add_option("--out-dir", tr_out, "output directory")->required();
    train->add_option("--resume", tr_resume, "checkpoint to resume from");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or classical controller");
    std::string ev_config, ev_checkpoint, ev_controller, ev_scenarios, ev_out = "eval";
    eval->add_option("--config", ev_config, "experiment config (JSON)")->required();
    auto* opt_ck = eval->add_option("--checkpoint", ev_checkpoint, "checkpoint file");
    auto* opt_ctrl = eval->add_option("--controller", ev_controller, "fixed_time|greedy|max_pressure");
    opt_ck->excludes(opt_ctrl);
    eval->add_option("--scenarios", ev_scenarios, "comma-separated seeds (default: config eval seeds)");
    eval->add_option("--out", ev_out, "output prefix: writes <out>.csv and <out>.summary.json");

    auto* compare = app.add_subcommand("compare", "train/evaluate methods on identical seeds");
    std::string cp_config, cp_methods, cp_out = "compare";
    compare->add_option("--config", cp_config, "experiment config (JSON)")->required();
    compare->add_option("--methods", cp_methods, "comma-separated method names")->required();
    compare->add_option("--out", cp_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen_net->parsed()) return cmd_gen_net(gn_out, gn_rows, gn_cols);
        if (gen_flows->parsed()) return cmd_gen_flows(gf_net, gf_rows, gf_cols, gf_rate, gf_horizon, gf_seed, gf_out);
        if (train->parsed()) return cmd_train(tr_config, tr_out, tr_resume);
        if (eval->parsed()) return cmd_eval(ev_config, ev_checkpoint, ev_controller, ev_scenarios, ev_out);
        if (compare->parsed()) return cmd_compare(cp_config, cp_methods, cp_out);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "fault: " << e.what() << "\n";
        return kExitFault;
    }
    return kExitUsage;
}
