#include "rwl/experiment.hpp"

#include "rwl/attack.hpp"
#include "rwl/rng.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace rwl {

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
    return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") {
        return true;
    }
    if (v == "false") {
        return false;
    }
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

struct Field {
    std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field double_field(T ExperimentConfig::*member) {
    return {[member](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.*member = parse_double(k, v);
            },
            [member](const ExperimentConfig& c) { return format_double(c.*member); }};
}

Field count_field(std::size_t ExperimentConfig::*member) {
    return {[member](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.*member = static_cast<std::size_t>(parse_uint(k, v));
            },
            [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

Field bool_field(bool ExperimentConfig::*member) {
    return {[member](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.*member = parse_bool(k, v);
            },
            [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field string_field(std::string ExperimentConfig::*member) {
    return {[member](ExperimentConfig& c, const std::string&, const std::string& v) { c.*member = v; },
            [member](const ExperimentConfig& c) { return c.*member; }};
}

const std::vector<std::pair<std::string, Field>>& field_table() {
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        t.emplace_back("dataset", string_field(&ExperimentConfig::dataset));
        t.emplace_back("mode", Field{[](ExperimentConfig& c, const std::string&, const std::string& v) {
                                         c.mode = parse_mode(v);
                                     },
                                     [](const ExperimentConfig& c) { return to_string(c.mode); }});
        t.emplace_back("attack", Field{[](ExperimentConfig& c, const std::string&, const std::string& v) {
                                           c.attack = parse_attack(v);
                                       },
                                       [](const ExperimentConfig& c) { return to_string(c.attack); }});
        t.emplace_back("ptb_rate", double_field(&ExperimentConfig::ptb_rate));
        t.emplace_back("attack_edges", string_field(&ExperimentConfig::attack_edges));
        t.emplace_back("lcc", bool_field(&ExperimentConfig::lcc));
        t.emplace_back("row_normalize", bool_field(&ExperimentConfig::row_normalize));
        t.emplace_back("split", Field{[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                          if (v == "random") {
                                              c.split = SplitSource::random;
                                          } else if (v == "stored") {
                                              c.split = SplitSource::stored;
                                          } else {
                                              throw ConfigError("config key '" + k +
                                                                "': expected random or stored, got '" + v + "'");
                                          }
                                      },
                                      [](const ExperimentConfig& c) {
                                          return std::string(c.split == SplitSource::random ? "random" : "stored");
                                      }});
        t.emplace_back("train_ratio", Field{[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                                c.ratios.train = parse_double(k, v);
                                            },
                                            [](const ExperimentConfig& c) { return format_double(c.ratios.train); }});
        t.emplace_back("val_ratio", Field{[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                              c.ratios.val = parse_double(k, v);
                                          },
                                          [](const ExperimentConfig& c) { return format_double(c.ratios.val); }});
        t.emplace_back("test_ratio", Field{[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                               c.ratios.test = parse_double(k, v);
                                           },
                                           [](const ExperimentConfig& c) { return format_double(c.ratios.test); }});
        t.emplace_back("alpha", double_field(&ExperimentConfig::alpha));
        t.emplace_back("beta", double_field(&ExperimentConfig::beta));
        t.emplace_back("beta_grid",
                       Field{[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                 c.beta_grid.clear();
                                 std::stringstream ss(v);
                                 std::string item;
                                 while (std::getline(ss, item, ',')) {
                                     c.beta_grid.push_back(parse_double(k, trim(item)));
                                 }
                             },
                             [](const ExperimentConfig& c) {
                                 std::string out;
                                 for (std::size_t i = 0; i < c.beta_grid.size(); ++i) {
                                     out += (i ? "," : "") + format_double(c.beta_grid[i]);
                                 }
                                 return out;
                             }});
        t.emplace_back("c_form", Field{[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                           if (v == "exact") {
                                               c.c_form = LinearTermForm::exact;
                                           } else if (v == "printed") {
                                               c.c_form = LinearTermForm::printed;
                                           } else {
                                               throw ConfigError("config key '" + k +
                                                                 "': expected exact or printed, got '" + v + "'");
                                           }
                                       },
                                       [](const ExperimentConfig& c) {
                                           return std::string(c.c_form == LinearTermForm::exact ? "exact"
                                                                                                 : "printed");
                                       }});
        t.emplace_back("stage1_iters", count_field(&ExperimentConfig::stage1_iters));
        t.emplace_back("stage1_kkt_tol", double_field(&ExperimentConfig::stage1_kkt_tol));
        t.emplace_back("stage1_obj_rel_tol", double_field(&ExperimentConfig::stage1_obj_rel_tol));
        t.emplace_back("stage1_step", Field{[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                                if (v.empty() || v == "auto") {
                                                    c.stage1_step.reset();
                                                } else {
                                                    c.stage1_step = parse_double(k, v);
                                                }
                                            },
                                            [](const ExperimentConfig& c) {
                                                return c.stage1_step ? format_double(*c.stage1_step)
                                                                     : std::string("auto");
                                            }});
        t.emplace_back("w_lr", double_field(&ExperimentConfig::w_lr));
        t.emplace_back("l2_prime", Field{[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                             if (v.empty() || v == "auto") {
                                                 c.l2_prime.reset();
                                             } else {
                                                 c.l2_prime = parse_double(k, v);
                                             }
                                         },
                                         [](const ExperimentConfig& c) {
                                             return c.l2_prime ? format_double(*c.l2_prime) : std::string("auto");
                                         }});
        t.emplace_back("outer_epochs", count_field(&ExperimentConfig::outer_epochs));
        t.emplace_back("inner_T", Field{[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                            if (v.empty() || v == "auto") {
                                                c.inner_T.reset();
                                            } else {
                                                c.inner_T = static_cast<std::size_t>(parse_uint(k, v));
                                            }
                                        },
                                        [](const ExperimentConfig& c) {
                                            return c.inner_T ? std::to_string(*c.inner_T) : std::string("auto");
                                        }});
        t.emplace_back("max_epochs", count_field(&ExperimentConfig::max_epochs));
        t.emplace_back("patience", count_field(&ExperimentConfig::patience));
        t.emplace_back("optimizer", Field{[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                              if (v == "adam") {
                                                  c.optimizer = OptimizerKind::adam;
                                              } else if (v == "sgd") {
                                                  c.optimizer = OptimizerKind::sgd;
                                              } else {
                                                  throw ConfigError("config key '" + k +
                                                                    "': expected adam or sgd, got '" + v + "'");
                                              }
                                          },
                                          [](const ExperimentConfig& c) {
                                              return std::string(c.optimizer == OptimizerKind::adam ? "adam" : "sgd");
                                          }});
        t.emplace_back("theta_lr", double_field(&ExperimentConfig::theta_lr));
        t.emplace_back("hidden", count_field(&ExperimentConfig::hidden));
        t.emplace_back("dropout", double_field(&ExperimentConfig::dropout));
        t.emplace_back("weight_decay", double_field(&ExperimentConfig::weight_decay));
        t.emplace_back("seed", Field{[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                         c.seed = parse_uint(k, v);
                                     },
                                     [](const ExperimentConfig& c) { return std::to_string(c.seed); }});
        t.emplace_back("output", string_field(&ExperimentConfig::output));
        return t;
    }();
    return table;
}

const Field& find_field(const std::string& key) {
    for (const auto& [name, field] : field_table()) {
        if (name == key) {
            return field;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, field] : field_table()) {
            k.push_back(name);
        }
        return k;
    }();
    return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    find_field(key).set(cfg, key, value);
}

std::string get_config_value(const ExperimentConfig& cfg, const std::string& key) {
    return find_field(key).get(cfg);
}

std::string to_config_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& [name, field] : field_table()) {
        out += name + " = " + field.get(cfg) + "\n";
    }
    return out;
}

ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        set_config_value(base, trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    }
    return base;
}

ExperimentConfig load_config_file(const std::filesystem::path& file, ExperimentConfig base) {
    std::ifstream in(file);
    if (!in) {
        throw ConfigError("cannot read config file " + file.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), std::move(base));
}

void validate(const ExperimentConfig& cfg) {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) {
            throw ConfigError(msg);
        }
    };
    require(!cfg.dataset.empty(), "dataset path is required");
    require(cfg.ptb_rate >= 0.0, "ptb_rate must be >= 0");
    require(cfg.attack != AttackKind::external_edgelist || !cfg.attack_edges.empty(),
            "attack = external-edgelist needs attack_edges");
    require(cfg.ratios.train > 0 && cfg.ratios.val > 0 && cfg.ratios.test > 0 &&
                std::abs(cfg.ratios.train + cfg.ratios.val + cfg.ratios.test - 1.0) <= 1e-9,
            "split ratios must be positive and sum to 1");
    require(cfg.alpha > 0.0, "alpha must be > 0");
    require(cfg.beta >= 0.0, "beta must be >= 0");
    for (double b : cfg.beta_grid) {
        require(b >= 0.0, "beta_grid entries must be >= 0");
    }
    require(cfg.stage1_iters >= 1 && cfg.outer_epochs >= 1 && cfg.max_epochs >= 1 && cfg.patience >= 1 &&
                cfg.hidden >= 1,
            "epoch, iteration, patience and hidden counts must be >= 1");
    require(!cfg.inner_T || *cfg.inner_T >= 1, "inner_T must be >= 1");
    require(cfg.w_lr > 0.0 && cfg.theta_lr > 0.0, "step sizes must be > 0");
    require(!cfg.l2_prime || *cfg.l2_prime > 0.0, "l2_prime must be > 0");
    require(!cfg.stage1_step || *cfg.stage1_step > 0.0, "stage1_step must be > 0");
    require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "dropout must lie in [0, 1)");
    require(cfg.weight_decay >= 0.0, "weight_decay must be >= 0");
    require(cfg.stage1_kkt_tol >= 0.0, "stage1_kkt_tol must be >= 0");
    require(!cfg.output.empty(), "output directory is required");
}

std::string to_string(RunMode mode) {
    switch (mode) {
    case RunMode::gcn_only: return "gcn-only";
    case RunMode::two_stage: return "two-stage";
    case RunMode::joint: return "joint";
    }
    return "?";
}

std::string to_string(AttackKind attack) {
    switch (attack) {
    case AttackKind::none: return "none";
    case AttackKind::random: return "random";
    case AttackKind::external_edgelist: return "external-edgelist";
    }
    return "?";
}

RunMode parse_mode(const std::string& s) {
    for (RunMode m : {RunMode::gcn_only, RunMode::two_stage, RunMode::joint}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    throw ConfigError("mode must be gcn-only, two-stage or joint, got '" + s + "'");
}

AttackKind parse_attack(const std::string& s) {
    for (AttackKind a : {AttackKind::none, AttackKind::random, AttackKind::external_edgelist}) {
        if (to_string(a) == s) {
            return a;
        }
    }
    throw ConfigError("attack must be none, random or external-edgelist, got '" + s + "'");
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& [name, secs] : phase_seconds) {
        phases.push_back({{"phase", name}, {"seconds", secs}});
    }
    return {
        {"config", config_text},
        {"dataset",
         {{"loaded_nodes", stats.loaded_nodes},
          {"nodes", stats.nodes},
          {"edges", stats.edges},
          {"features", stats.features},
          {"classes", stats.classes},
          {"perturbed_edges", stats.perturbed_edges},
          {"injected", stats.injected},
          {"removed", stats.removed},
          {"train", stats.train},
          {"val", stats.val},
          {"test", stats.test}}},
        {"seed", seed},
        {"accuracy", {{"train", train_acc}, {"val", val_acc}, {"test", test_acc}}},
        {"selected_beta", selected_beta},
        {"best_epoch", best_epoch},
        {"timing", {{"phases", phases}, {"total_seconds", total_seconds}}},
        {"artifacts", artifacts},
    };
}

double evaluate(const GcnParams& params, const EdgeWeightVector& w, const SparseMatrix& X,
                std::span<const int> labels, std::span<const int> nodes) {
    if (nodes.empty()) {
        throw std::invalid_argument("evaluate: empty node set");
    }
    const NormalizedAdjacency adj = normalize_adjacency(w);
    return accuracy(gcn_forward(params, adj, X, Mode::eval).logits, labels, nodes);
}

namespace {

using Clock = std::chrono::steady_clock;

class PhaseTimer {
public:
    template <class F>
    auto run(const std::string& phase, F&& f) {
        const auto start = Clock::now();
        try {
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                record(phase, start);
            } else {
                auto out = f();
                record(phase, start);
                return out;
            }
        } catch (const PhaseError&) {
            throw;
        } catch (const std::exception& e) {
            throw PhaseError(phase, e.what());
        }
    }

    std::vector<std::pair<std::string, double>> phases;

private:
    void record(const std::string& phase, Clock::time_point start) {
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        for (auto& [name, total] : phases) {
            if (name == phase) {
                total += secs;
                return;
            }
        }
        phases.emplace_back(phase, secs);
    }
};

struct Prepared {
    Dataset ds;
    Split split;
    PerturbedGraph pg;
};

std::vector<Edge> remap_external(const Dataset& ds, const std::vector<Edge>& edges) {
    std::unordered_map<int, int> index;
    for (std::size_t i = 0; i < ds.original_ids.size(); ++i) {
        index.emplace(ds.original_ids[i], static_cast<int>(i));
    }
    std::vector<Edge> out;
    for (const Edge& e : edges) {
        const auto u = index.find(e.u);
        const auto v = index.find(e.v);
        if (u != index.end() && v != index.end()) {
            out.push_back({u->second, v->second});
        }
    }
    return out;
}

GcnTrainConfig gcn_config(const ExperimentConfig& cfg) {
    GcnTrainConfig g;
    g.hidden = cfg.hidden;
    g.dropout = cfg.dropout;
    g.weight_decay = cfg.weight_decay;
    g.optimizer = cfg.optimizer;
    g.lr = cfg.theta_lr;
    g.max_epochs = cfg.max_epochs;
    g.patience = cfg.patience;
    return g;
}

struct Candidate {
    double beta = 0;
    EdgeWeightVector w;
    GcnParams params;
    std::size_t best_epoch = 0;
    double val_acc = -1;
    nlohmann::json metrics = nlohmann::json::array();
    std::optional<SolveTrace> trace;
};

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + file.string());
    }
    out << text;
}

} // namespace

Dataset load_preprocessed(const ExperimentConfig& cfg, std::size_t* loaded_nodes) {
    Dataset ds = load_dataset(cfg.dataset);
    if (loaded_nodes != nullptr) {
        *loaded_nodes = ds.nodes();
    }
    if (cfg.lcc) {
        ds = largest_connected_component(ds);
    }
    if (cfg.row_normalize) {
        row_normalize(ds.features);
    }
    return ds;
}

PerturbedGraph apply_attack(const ExperimentConfig& cfg, const Dataset& ds, std::size_t loaded_nodes) {
    switch (cfg.attack) {
    case AttackKind::none: return unperturbed(ds);
    case AttackKind::random: return random_attack(ds, cfg.ptb_rate, cfg.seed);
    case AttackKind::external_edgelist: {
        const auto raw = read_edge_list(cfg.attack_edges, loaded_nodes);
        return from_external(ds, remap_external(ds, raw));
    }
    }
    throw std::logic_error("unhandled attack kind");
}

RunReport run_experiment(const ExperimentConfig& cfg) {
    const auto start = Clock::now();
    PhaseTimer timer;
    timer.run("config", [&] { validate(cfg); });

    RunReport report;
    report.config_text = to_config_text(cfg);
    report.seed = cfg.seed;
    const std::filesystem::path out_dir = cfg.output;

    Dataset ds = timer.run("load", [&] { return load_preprocessed(cfg, &report.stats.loaded_nodes); });
    const Split split = timer.run("split", [&] {
        Split s = [&] {
            if (cfg.split == SplitSource::stored) {
                auto stored = stored_split(ds);
                if (!stored) {
                    throw DatasetError("split = stored but the dataset has no split.tsv");
                }
                return *stored;
            }
            return make_splits(ds.nodes(), cfg.ratios, cfg.seed);
        }();
        if (s.train.empty() || s.val.empty() || s.test.empty()) {
            throw DatasetError("split leaves an empty node set (train " + std::to_string(s.train.size()) +
                               ", val " + std::to_string(s.val.size()) + ", test " +
                               std::to_string(s.test.size()) + ")");
        }
        return s;
    });
    const PerturbedGraph pg =
        timer.run("attack", [&] { return apply_attack(cfg, ds, report.stats.loaded_nodes); });

    report.stats.nodes = ds.nodes();
    report.stats.edges = ds.edges.size();
    report.stats.features = ds.feature_dim();
    report.stats.classes = ds.num_classes;
    report.stats.perturbed_edges = pg.edges.size();
    report.stats.injected = pg.injected.size();
    report.stats.removed = pg.removed.size();
    report.stats.train = split.train.size();
    report.stats.val = split.val.size();
    report.stats.test = split.test.size();

    const SparseMatrix X = ds.features.sparseView();
    const std::span<const int> labels = ds.labels;
    const EdgeWeightVector w_noisy = noisy_weights(pg);
    const GcnTrainConfig gcfg = gcn_config(cfg);
    const std::vector<double> betas = cfg.beta_grid.empty() ? std::vector<double>{cfg.beta} : cfg.beta_grid;

    Candidate best;
    auto consider = [&](Candidate cand) {
        if (cand.val_acc > best.val_acc) {
            best = std::move(cand);
        }
    };
    auto train_fixed = [&](Candidate& cand) {
        Rng init_rng = make_stream(cfg.seed, "init");
        Rng dropout_rng = make_stream(cfg.seed, "dropout");
        const NormalizedAdjacency adj = normalize_adjacency(cand.w);
        GcnTrainResult r = train_gcn(adj, X, labels, split.train, split.val, split.test,
                                     static_cast<std::size_t>(ds.num_classes), gcfg, init_rng, dropout_rng);
        for (const EpochRecord& e : r.history) {
            cand.metrics.push_back({{"beta", cand.beta}, {"epoch", e.epoch}, {"train_loss", e.train_loss},
                                    {"val_loss", e.val_loss}, {"train_acc", e.train_acc},
                                    {"val_acc", e.val_acc}, {"test_acc", e.test_acc}});
        }
        cand.params = std::move(r.params);
        cand.best_epoch = r.best_epoch;
        cand.val_acc = accuracy(gcn_forward(cand.params, adj, X, Mode::eval).logits, labels, split.val);
    };

    switch (cfg.mode) {
    case RunMode::gcn_only: {
        Candidate cand{cfg.beta, w_noisy, {}, 0, -1, nlohmann::json::array(), std::nullopt};
        timer.run("train", [&] { train_fixed(cand); });
        consider(std::move(cand));
        break;
    }
    case RunMode::two_stage: {
        for (double beta : betas) {
            Candidate cand{beta, w_noisy, {}, 0, -1, nlohmann::json::array(), std::nullopt};
            timer.run("stage1", [&] {
                const DenoiseProblem problem = make_denoise_problem(to_noisy_laplacian(pg), ds.features, cfg.alpha, beta,
                                                                    cfg.c_form);
                SolveOptions opts;
                opts.max_iters = cfg.stage1_iters;
                opts.kkt_tol = cfg.stage1_kkt_tol;
                opts.obj_rel_tol = cfg.stage1_obj_rel_tol;
                opts.step = cfg.stage1_step.value_or(0.0);
                SolveResult solved = stage1_solve(problem, w_noisy, opts);
                cand.w = std::move(solved.w);
                cand.trace = std::move(solved.trace);
            });
            timer.run("train", [&] { train_fixed(cand); });
            consider(std::move(cand));
        }
        break;
    }
    case RunMode::joint: {
        for (double beta : betas) {
            Candidate cand{beta, w_noisy, {}, 0, -1, nlohmann::json::array(), std::nullopt};
            const DenoiseProblem problem = timer.run("precompute", [&] {
                return make_denoise_problem(to_noisy_laplacian(pg), ds.features, cfg.alpha, beta, cfg.c_form);
            });
            timer.run("train", [&] {
                JointConfig jc;
                jc.alpha = cfg.alpha;
                jc.beta = beta;
                jc.c_form = cfg.c_form;
                jc.l2_prime = cfg.l2_prime;
                jc.w_lr = cfg.w_lr;
                jc.gcn = gcfg;
                jc.outer_epochs = cfg.outer_epochs;
                jc.inner_T = cfg.inner_T.value_or(cfg.attack == AttackKind::random ? 2 : 1);
                jc.seed = cfg.seed;
                const NodeSets nodes{split.train, split.val, split.test};
                JointTrainResult r = joint_train(problem, w_noisy, X, labels,
                                                 static_cast<std::size_t>(ds.num_classes), nodes, jc);
                for (const JointEpochRecord& e : r.history) {
                    cand.metrics.push_back({{"beta", beta}, {"epoch", e.epoch}, {"nr_objective", e.nr_objective},
                                            {"train_loss", e.train_loss}, {"train_acc", e.train_acc},
                                            {"val_acc", e.val_acc}, {"test_acc", e.test_acc}});
                }
                cand.w = std::move(r.w);
                cand.params = std::move(r.params);
                cand.best_epoch = r.best_epoch;
                cand.val_acc = r.history[r.best_epoch].val_acc;
            });
            consider(std::move(cand));
        }
        break;
    }
    }

    timer.run("evaluate", [&] {
        report.train_acc = evaluate(best.params, best.w, X, labels, split.train);
        report.val_acc = evaluate(best.params, best.w, X, labels, split.val);
        report.test_acc = evaluate(best.params, best.w, X, labels, split.test);
        report.selected_beta = best.beta;
        report.best_epoch = best.best_epoch;
    });

    timer.run("write", [&] {
        std::filesystem::create_directories(out_dir);
        write_text(out_dir / "config.txt", report.config_text);
        report.artifacts["config"] = (out_dir / "config.txt").string();
        std::string lines;
        for (const auto& rec : best.metrics) {
            lines += rec.dump() + "\n";
        }
        write_text(out_dir / "metrics.jsonl", lines);
        report.artifacts["metrics"] = (out_dir / "metrics.jsonl").string();
        if (cfg.mode != RunMode::gcn_only) {
            write_learned_graph(best.w, out_dir / "learned_graph.tsv");
            report.artifacts["learned_graph"] = (out_dir / "learned_graph.tsv").string();
        }
        if (best.trace) {
            write_trace(*best.trace, out_dir / "trace.jsonl");
            report.artifacts["trace"] = (out_dir / "trace.jsonl").string();
        }
        report.artifacts["report"] = (out_dir / "report.json").string();
    });

    report.phase_seconds = timer.phases;
    report.total_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    try {
        write_text(out_dir / "report.json", report.to_json().dump(2) + "\n");
    } catch (const std::exception& e) {
        throw PhaseError("write", e.what());
    }
    return report;
}

CellStats aggregate(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("aggregate: no values");
    }
    CellStats s;
    s.count = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.count);
    if (s.count > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - s.mean) * (v - s.mean);
        }
        s.std = std::sqrt(ss / static_cast<double>(s.count - 1));
    }
    return s;
}

SweepResult sweep(const ExperimentConfig& base, std::span<const RunMode> modes, std::span<const double> rates,
                  std::span<const std::uint64_t> seeds, std::size_t jobs) {
    if (modes.empty() || rates.empty() || seeds.empty()) {
        throw std::invalid_argument("sweep: modes, rates and seeds must be nonempty");
    }
    SweepResult result;
    result.modes.assign(modes.begin(), modes.end());
    result.rates.assign(rates.begin(), rates.end());

    std::vector<ExperimentConfig> cells;
    for (RunMode mode : modes) {
        for (double rate : rates) {
            for (std::uint64_t seed : seeds) {
                ExperimentConfig c = base;
                c.mode = mode;
                c.ptb_rate = rate;
                c.seed = seed;
                if (c.attack != AttackKind::external_edgelist) {
                    c.attack = rate > 0.0 ? AttackKind::random : AttackKind::none;
                }
                c.output = (std::filesystem::path(base.output) / to_string(mode) /
                            ("rate_" + format_double(rate)) / ("seed_" + std::to_string(seed)))
                               .string();
                cells.push_back(std::move(c));
                result.runs.push_back({mode, rate, seed, 0.0});
            }
        }
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size() || failed.load()) {
                return;
            }
            try {
                result.runs[i].test_acc = run_experiment(cells[i]).test_acc;
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mutex);
                if (!failed.exchange(true)) {
                    error = "sweep cell (mode=" + to_string(cells[i].mode) +
                            ", ptb_rate=" + format_double(cells[i].ptb_rate) +
                            ", seed=" + std::to_string(cells[i].seed) + ") failed: " + e.what();
                }
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(jobs, 1, cells.size());
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (failed) {
        throw std::runtime_error(error);
    }
    return result;
}

std::string sweep_table(const SweepResult& result) {
    std::string out = "ptb_rate";
    for (RunMode m : result.modes) {
        out += "\t" + to_string(m) + "_mean\t" + to_string(m) + "_std";
    }
    out += "\n";
    char buf[64];
    for (double rate : result.rates) {
        out += format_double(rate);
        for (RunMode m : result.modes) {
            std::vector<double> accs;
            for (const SweepRun& r : result.runs) {
                if (r.mode == m && r.ptb_rate == rate) {
                    accs.push_back(100.0 * r.test_acc);
                }
            }
            const CellStats s = aggregate(accs);
            std::snprintf(buf, sizeof buf, "\t%.2f\t%.2f", s.mean, s.std);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

} // namespace rwl
