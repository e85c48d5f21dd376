// rwl: graph denoising and robust GCN training experiments.

#include "rwl/attack.hpp"
#include "rwl/denoise.hpp"
#include "rwl/experiment.hpp"
#include "rwl/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

using namespace rwl;

// Config keys exposed as --key flags; values are collected verbatim and
// applied after the config file, so flags win.
struct ConfigFlags {
    std::string config_file;
    std::map<std::string, std::string> values;

    void attach(CLI::App& app) {
        app.add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
        for (const std::string& key : config_keys()) {
            app.add_option("--" + key, values[key], "config key " + key);
        }
    }

    ExperimentConfig resolve(const CLI::App& app) const {
        ExperimentConfig cfg;
        if (!config_file.empty()) {
            cfg = load_config_file(config_file);
        }
        for (const auto& [key, value] : values) {
            if (app.count("--" + key) > 0) {
                set_config_value(cfg, key, value);
            }
        }
        return cfg;
    }
};

int fail(const std::string& phase, const std::string& message) {
    std::cerr << "error [" << phase << "]: " << message << "\n";
    return 2;
}

template <class F>
int guarded(F&& body) {
    try {
        body();
        return 0;
    } catch (const PhaseError& e) {
        return fail(e.phase(), e.what());
    } catch (const ConfigError& e) {
        return fail("config", e.what());
    } catch (const DatasetError& e) {
        return fail("load", e.what());
    } catch (const std::exception& e) {
        return fail("run", e.what());
    }
}

std::vector<RunMode> parse_modes(const std::vector<std::string>& names) {
    std::vector<RunMode> out;
    for (const auto& n : names) {
        out.push_back(parse_mode(n));
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph denoising and robust GCN training"};
    app.require_subcommand(1);

    ConfigFlags run_flags;
    CLI::App* run = app.add_subcommand("run", "Run one experiment and write report.json");
    run_flags.attach(*run);

    ConfigFlags sweep_flags;
    std::vector<double> rates{0.0};
    std::vector<std::uint64_t> seeds{0};
    std::vector<std::string> modes{"gcn-only", "two-stage", "joint"};
    std::size_t jobs = 1;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run a grid of rates, seeds and modes and tabulate accuracy");
    sweep_flags.attach(*sweep_cmd);
    sweep_cmd->add_option("--rates", rates, "perturbation rates")->delimiter(',');
    sweep_cmd->add_option("--seeds", seeds, "root seeds")->delimiter(',');
    sweep_cmd->add_option("--modes", modes, "gcn-only, two-stage, joint")->delimiter(',');
    sweep_cmd->add_option("--jobs", jobs, "parallel cells")->check(CLI::PositiveNumber);

    ConfigFlags denoise_flags;
    CLI::App* denoise = app.add_subcommand("denoise", "Stage-1 denoising only; writes the learned graph");
    denoise_flags.attach(*denoise);

    ConfigFlags attack_flags;
    CLI::App* attack = app.add_subcommand("attack", "Write the poisoned edge list");
    attack_flags.attach(*attack);

    SyntheticSpec spec;
    std::string synth_out;
    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic citation-like dataset");
    synth->add_option("--nodes", spec.nodes);
    synth->add_option("--classes", spec.classes);
    synth->add_option("--features", spec.features);
    synth->add_option("--mean-degree", spec.mean_degree);
    synth->add_option("--homophily", spec.homophily);
    synth->add_option("--words", spec.words_per_node);
    synth->add_option("--topic-fraction", spec.topic_fraction);
    synth->add_option("--seed", spec.seed);
    synth->add_option("--output", synth_out)->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        return guarded([&] {
            const RunReport r = run_experiment(run_flags.resolve(*run));
            std::cout << "test_acc " << r.test_acc << " val_acc " << r.val_acc << " train_acc " << r.train_acc
                      << " seconds " << r.total_seconds << "\n"
                      << "report " << r.artifacts.at("report") << "\n";
        });
    }
    if (sweep_cmd->parsed()) {
        return guarded([&] {
            ExperimentConfig base = sweep_flags.resolve(*sweep_cmd);
            validate(base);
            const auto mode_list = parse_modes(modes);
            const SweepResult res = sweep(base, mode_list, rates, seeds, jobs);
            const std::filesystem::path out = base.output;
            std::filesystem::create_directories(out);
            const std::string table = sweep_table(res);
            std::ofstream(out / "sweep.tsv") << table;
            std::ofstream runs(out / "sweep_runs.tsv");
            runs << "mode\tptb_rate\tseed\ttest_acc\n";
            for (const SweepRun& r : res.runs) {
                runs << to_string(r.mode) << '\t' << r.ptb_rate << '\t' << r.seed << '\t' << r.test_acc << '\n';
            }
            std::cout << table;
        });
    }
    if (denoise->parsed()) {
        return guarded([&] {
            const ExperimentConfig cfg = denoise_flags.resolve(*denoise);
            validate(cfg);
            std::size_t loaded = 0;
            Dataset ds;
            PerturbedGraph pg;
            try {
                ds = load_preprocessed(cfg, &loaded);
            } catch (const std::exception& e) {
                throw PhaseError("load", e.what());
            }
            try {
                pg = apply_attack(cfg, ds, loaded);
            } catch (const std::exception& e) {
                throw PhaseError("attack", e.what());
            }
            try {
                const DenoiseProblem problem =
                    make_denoise_problem(to_noisy_laplacian(pg), ds.features, cfg.alpha, cfg.beta, cfg.c_form);
                SolveOptions opts;
                opts.max_iters = cfg.stage1_iters;
                opts.kkt_tol = cfg.stage1_kkt_tol;
                opts.obj_rel_tol = cfg.stage1_obj_rel_tol;
                opts.step = cfg.stage1_step.value_or(0.0);
                const SolveResult res = stage1_solve(problem, noisy_weights(pg), opts);
                const std::filesystem::path out = cfg.output;
                std::filesystem::create_directories(out);
                write_learned_graph(res.w, out / "learned_graph.tsv");
                write_trace(res.trace, out / "trace.jsonl");
                std::cout << "iterations " << res.trace.iterations << " stop " << res.trace.stop_reason
                          << " kkt " << res.trace.final_kkt << " objective " << res.trace.records.back().objective
                          << " edges " << res.w.nonzeros() << "\n";
            } catch (const std::exception& e) {
                throw PhaseError("stage1", e.what());
            }
        });
    }
    if (attack->parsed()) {
        return guarded([&] {
            const ExperimentConfig cfg = attack_flags.resolve(*attack);
            validate(cfg);
            std::size_t loaded = 0;
            Dataset ds;
            try {
                ds = load_preprocessed(cfg, &loaded);
            } catch (const std::exception& e) {
                throw PhaseError("load", e.what());
            }
            try {
                const PerturbedGraph pg = apply_attack(cfg, ds, loaded);
                std::filesystem::create_directories(cfg.output);
                write_perturbed(pg, cfg.output);
                std::cout << "clean " << pg.clean_count << " injected " << pg.injected.size() << " total "
                          << pg.edges.size() << "\n";
            } catch (const std::exception& e) {
                throw PhaseError("attack", e.what());
            }
        });
    }
    if (synth->parsed()) {
        return guarded([&] {
            write_dataset(make_synthetic(spec), synth_out);
            std::cout << "wrote " << synth_out << "\n";
        });
    }
    return 0;
}
