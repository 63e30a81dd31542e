#include "diffnet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "diffnet/util.hpp"

namespace diffnet {

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// per-node scalar parameter: plain number, explicit array, or a uniform range
// resolved from the config stream so the draw is reproducible
std::vector<double> resolve_per_node(const nlohmann::json& value, int n,
                                     std::uint64_t seed, std::uint64_t channel_salt,
                                     const std::string& what) {
    std::vector<double> out(static_cast<size_t>(n));
    if (value.is_number()) {
        std::fill(out.begin(), out.end(), value.get<double>());
        return out;
    }
    if (value.is_array()) {
        if (static_cast<int>(value.size()) != n)
            throw ConfigError("config: '" + what + "' array must have one entry per node");
        for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = value.at(i).get<double>();
        return out;
    }
    if (value.is_object() && value.contains("range")) {
        double lo = value.at("range").at(0).get<double>();
        double hi = value.at("range").at(1).get<double>();
        if (hi < lo) throw ConfigError("config: '" + what + "' range is reversed");
        for (int i = 0; i < n; ++i) {
            RngStream s(seed, channel_salt, static_cast<std::uint64_t>(i),
                        RngStream::kConfig);
            out[static_cast<size_t>(i)] = lo + (hi - lo) * s.uniform01();
        }
        return out;
    }
    throw ConfigError("config: '" + what + "' must be a number, array, or {range:[lo,hi]}");
}

IdealStates states_from_json(const nlohmann::json& obj) {
    IdealStates states;
    for (const auto& [name, vec] : obj.items()) {
        auto v = vec.get<std::vector<double>>();
        states.per_cluster[name] =
            Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
    }
    return states;
}

TopologyDocument resolve_topology(const nlohmann::json& doc, std::uint64_t seed) {
    if (!doc.contains("topology")) throw ConfigError("config: missing 'topology'");
    const auto& t = doc.at("topology");
    if (t.contains("file")) {
        std::ifstream in(t.at("file").get<std::string>());
        if (!in) throw ConfigError("config: cannot open topology file");
        nlohmann::json j;
        in >> j;
        return load_topology(j);
    }
    if (t.contains("generator")) {
        const auto& g = t.at("generator");
        std::string type = g.at("type").get<std::string>();
        std::uint64_t gseed = g.value("seed", seed);
        if (type == "two-cluster-geometric") {
            auto graph = random_geometric(g.at("nodes").get<int>(),
                                          g.at("radius").get<double>(), gseed,
                                          g.value("byzantine", 0), 2);
            return TopologyDocument{std::move(graph.topo), IdealStates{},
                                    std::move(graph.positions)};
        }
        if (type == "grid") {
            return TopologyDocument{make_grid(g.at("rows").get<int>(),
                                              g.at("cols").get<int>()),
                                    IdealStates{}, {}};
        }
        if (type == "ring")
            return TopologyDocument{make_ring(g.at("nodes").get<int>()), IdealStates{}, {}};
        if (type == "line")
            return TopologyDocument{make_line(g.at("nodes").get<int>()), IdealStates{}, {}};
        throw ConfigError("config: unknown topology generator '" + type + "'");
    }
    // inline document; ideal_states may come from the scenario instead
    nlohmann::json inline_doc = t;
    if (!inline_doc.contains("ideal_states"))
        inline_doc["ideal_states"] = nlohmann::json::object();
    auto loaded = load_topology(inline_doc);
    return loaded;
}

std::vector<NoiseModel> resolve_noise(const nlohmann::json& noise, const Topology& topo,
                                      const std::vector<double>& sigma_u_sq,
                                      std::uint64_t seed) {
    int n = topo.num_nodes();
    std::string type = noise.at("type").get<std::string>();

    // SNR-derived variance: response power of a unit-norm state through the
    // node's regressor, over 10^(snr/10)
    auto base_variance = [&](const char* key, std::uint64_t salt) {
        std::vector<double> var;
        if (noise.contains("snr_db")) {
            double snr = noise.at("snr_db").get<double>();
            double factor = std::pow(10.0, snr / 10.0);
            var.resize(static_cast<size_t>(n), 1.0);
            for (int i = 0; i < n; ++i)
                var[static_cast<size_t>(i)] = sigma_u_sq[static_cast<size_t>(i)] / factor;
        } else {
            var = resolve_per_node(noise.at(key), n, seed, salt, key);
        }
        return var;
    };

    std::vector<NoiseModel> out;
    out.reserve(static_cast<size_t>(n));
    if (type == "gaussian") {
        auto var = base_variance("variance", 11);
        for (int i = 0; i < n; ++i)
            out.emplace_back(GaussianNoise{var[static_cast<size_t>(i)]});
    } else if (type == "cg") {
        auto var = base_variance("sigma_v_sq", 12);
        auto p = resolve_per_node(noise.at("p"), n, seed, 13, "p");
        std::vector<double> impulse;
        if (noise.contains("sigma_g_sq")) {
            impulse = resolve_per_node(noise.at("sigma_g_sq"), n, seed, 14, "sigma_g_sq");
        } else {
            double factor = noise.at("sigma_g_factor").get<double>();
            for (double v : var) impulse.push_back(factor * v);
        }
        for (int i = 0; i < n; ++i)
            out.emplace_back(ContaminatedGaussianNoise{var[static_cast<size_t>(i)],
                                                       impulse[static_cast<size_t>(i)],
                                                       p[static_cast<size_t>(i)]});
    } else if (type == "alpha-stable") {
        double alpha = noise.at("alpha").get<double>();
        double gamma = noise.at("gamma").get<double>();
        for (int i = 0; i < n; ++i) out.emplace_back(AlphaStableNoise{alpha, gamma});
    } else {
        throw ConfigError("config: unknown noise type '" + type + "'");
    }
    for (const auto& m : out) validate(m);
    return out;
}

AttackSpec resolve_attack(const nlohmann::json& a, const Topology& topo, int dim) {
    AttackSpec spec;
    spec.start_iteration = a.value("start_iteration", 0L);
    auto to_vec = [dim](const nlohmann::json& arr) {
        auto v = arr.get<std::vector<double>>();
        if (static_cast<int>(v.size()) != dim)
            throw ConfigError("config: attack state dimension mismatch");
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()))
            .eval();
    };
    for (int b : topo.byzantine()) {
        ByzantineBehavior behavior;
        const auto& ms = a.at("malicious_state");
        if (ms.is_array()) {
            behavior.shared_state = to_vec(ms);
        } else {
            behavior.shared_state = to_vec(ms.at(std::to_string(b)));
        }
        if (a.contains("mu_a")) {
            if (a.at("mu_a").is_number())
                behavior.mu_a = a.at("mu_a").get<double>();
            else
                behavior.mu_a = a.at("mu_a").at(std::to_string(b)).get<double>();
        }
        if (a.contains("per_target") && a.at("per_target").contains(std::to_string(b)))
            for (const auto& [victim, vec] :
                 a.at("per_target").at(std::to_string(b)).items())
                behavior.per_target[std::stoi(victim)] = to_vec(vec);
        spec.byzantine[b] = std::move(behavior);
    }
    spec.validate(dim);
    return spec;
}

}  // namespace

std::vector<int> ExperimentConfig::attacked_nodes() const {
    std::vector<int> out;
    if (!attack || !attack->enabled()) return out;
    const Topology& topo = topology.topo;
    for (int i : topo.normal_nodes()) {
        for (int j : topo.neighbors(i)) {
            if (j != i && topo.is_byzantine(j) && attack->byzantine.count(j)) {
                out.push_back(i);
                break;
            }
        }
    }
    return out;
}

std::unique_ptr<DataModel> ExperimentConfig::make_data_model(long run) const {
    if (scenario == ScenarioKind::kSensing) {
        return std::make_unique<SensingDataModel>(topology.topo, *sensing, seed, run);
    }
    return std::make_unique<LinearDataModel>(topology.topo, topology.states, sigma_u_sq,
                                             regressor_style, noise, seed, run);
}

ExperimentConfig load_config(const nlohmann::json& doc) {
    ExperimentConfig cfg(resolve_topology(doc, doc.value("seed", 1ull)));
    cfg.seed = doc.value("seed", 1ull);
    cfg.iterations = doc.value("iterations", 1000L);
    cfg.runs = doc.value("runs", 1L);
    if (cfg.iterations < 0 || cfg.runs < 1)
        throw ConfigError("config: need iterations >= 0 and runs >= 1");
    cfg.divergence_threshold = doc.value("divergence_threshold", 1e6);
    cfg.edge_threshold = doc.value("edge_threshold", 1e-3);
    if (doc.contains("trace")) {
        cfg.msd_every = doc.at("trace").value("msd_every", 1L);
        cfg.weights_every = doc.at("trace").value("weights_every", 0L);
    }
    if (cfg.msd_every < 1) throw ConfigError("config: msd_every must be >= 1");
    if (cfg.weights_every < 0) throw ConfigError("config: weights_every must be >= 0");

    cfg.algorithm = algorithm_from_string(doc.at("algorithm").get<std::string>());

    const Topology& topo = cfg.topology.topo;
    int n = topo.num_nodes();

    if (!doc.contains("scenario")) throw ConfigError("config: missing 'scenario'");
    const auto& sc = doc.at("scenario");
    std::string sc_type = sc.at("type").get<std::string>();

    int dim = 0;
    if (sc_type == "generic-linear" || sc_type == "localization") {
        cfg.scenario = sc_type == "localization" ? ScenarioKind::kLocalization
                                                 : ScenarioKind::kGenericLinear;
        if (cfg.scenario == ScenarioKind::kLocalization) {
            if (!sc.contains("targets"))
                throw ConfigError("config: localization scenario needs 'targets'");
            cfg.topology.states = states_from_json(sc.at("targets"));
            if (cfg.topology.states.dim() != 2)
                throw ConfigError("config: localization targets must be planar");
        } else if (sc.contains("states")) {
            cfg.topology.states = states_from_json(sc.at("states"));
        }
        if (cfg.topology.states.per_cluster.empty())
            throw ConfigError("config: no ideal states provided");
        cfg.topology.states.validate_against(topo);
        dim = cfg.topology.states.dim();

        const auto& reg = sc.at("regressor");
        if (reg.contains("dimension") && reg.at("dimension").get<int>() != dim)
            throw ConfigError("config: regressor dimension clashes with the states");
        std::string style = reg.value("style", std::string("iid"));
        if (style == "iid")
            cfg.regressor_style = RegressorStyle::kIidGaussian;
        else if (style == "tapped-delay")
            cfg.regressor_style = RegressorStyle::kTappedDelay;
        else
            throw ConfigError("config: unknown regressor style '" + style + "'");
        cfg.sigma_u_sq = resolve_per_node(reg.at("variance"), n, cfg.seed, 10, "variance");
        cfg.noise = resolve_noise(sc.at("noise"), topo, cfg.sigma_u_sq, cfg.seed);
    } else if (sc_type == "sensing") {
        cfg.scenario = ScenarioKind::kSensing;
        SensingScenario s;
        s.num_basis = sc.value("num_basis", 50);
        s.num_freqs = sc.value("num_freqs", 100);
        s.receiver_noise = sc.value("receiver_noise", 0.1);
        s.impulse_alpha = sc.at("impulse").value("alpha", 1.2);
        s.impulse_gamma = sc.at("impulse").value("gamma", 0.08);
        std::string channel = sc.value("channel", std::string("flat"));
        if (channel == "flat")
            s.channel = ChannelProfile::kFlatUnit;
        else if (channel == "lognormal")
            s.channel = ChannelProfile::kLogNormal;
        else
            throw ConfigError("config: unknown channel profile '" + channel + "'");
        s.lognormal_sigma = sc.value("lognormal_sigma", 0.3);

        if (sc.contains("active_bases")) {
            double power = sc.value("power", 0.7);
            for (const auto& [name, list] : sc.at("active_bases").items()) {
                Eigen::VectorXd w = Eigen::VectorXd::Zero(s.num_basis);
                for (int idx : list.get<std::vector<int>>()) {
                    if (idx < 0 || idx >= s.num_basis)
                        throw ConfigError("config: active basis index out of range");
                    w[idx] = power;
                }
                s.true_weights.per_cluster[name] = std::move(w);
            }
        } else {
            s.true_weights = states_from_json(sc.at("states"));
        }
        s.true_weights.validate_against(topo);
        cfg.topology.states = s.true_weights;
        dim = s.num_basis;

        std::string update = sc.value("update", std::string("block"));
        if (update == "block")
            cfg.block_update = BlockUpdateMode::kAverage;
        else if (update == "sequential")
            cfg.block_update = BlockUpdateMode::kSequential;
        else
            throw ConfigError("config: unknown block update mode '" + update + "'");
        cfg.sensing = std::move(s);
    } else {
        throw ConfigError("config: unknown scenario type '" + sc_type + "'");
    }

    const auto& ad = doc.at("adapt");
    auto mu = resolve_per_node(ad.at("mu"), n, cfg.seed, 20, "mu");
    auto lambda = resolve_per_node(ad.value("lambda", nlohmann::json(1.0)), n, cfg.seed,
                                   21, "lambda");
    cfg.adapt.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        cfg.adapt[static_cast<size_t>(i)].mu = mu[static_cast<size_t>(i)];
        cfg.adapt[static_cast<size_t>(i)].lambda = lambda[static_cast<size_t>(i)];
        if (!(mu[static_cast<size_t>(i)] > 0) || !(lambda[static_cast<size_t>(i)] > 0))
            throw ConfigError("config: mu and lambda must be positive");
    }

    if (doc.contains("combine")) {
        const auto& cm = doc.at("combine");
        cfg.combine.nu = cm.value("nu", 0.01);
        cfg.combine.rho = cm.value("rho", 0.0);
        cfg.combine.removal_count = cm.value("removal_count", 1);
        cfg.combine.gamma_sq_init = cm.value("gamma_sq_init", 1.0);
    }
    if (!(cfg.combine.nu > 0) || !(cfg.combine.nu < 1))
        throw ConfigError("config: nu must lie in (0,1)");
    if (cfg.combine.rho < 0 || cfg.combine.rho >= 1)
        throw ConfigError("config: rho must lie in [0,1)");
    if (cfg.combine.removal_count < 0)
        throw ConfigError("config: removal_count must be >= 0");
    if (!(cfg.combine.gamma_sq_init > 0))
        throw ConfigError("config: gamma_sq_init must be positive");

    if (doc.contains("attack") && !doc.at("attack").is_null()) {
        if (topo.byzantine().empty())
            throw ConfigError("config: attack configured but no byzantine nodes");
        cfg.attack = resolve_attack(doc.at("attack"), topo, dim);
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json doc;
    in >> doc;
    return load_config(doc);
}

nlohmann::json resolved_json(const ExperimentConfig& cfg) {
    nlohmann::json doc;
    doc["seed"] = cfg.seed;
    doc["iterations"] = cfg.iterations;
    doc["runs"] = cfg.runs;
    doc["algorithm"] = to_string(cfg.algorithm);
    doc["divergence_threshold"] = cfg.divergence_threshold;
    doc["edge_threshold"] = cfg.edge_threshold;
    doc["trace"] = {{"msd_every", cfg.msd_every}, {"weights_every", cfg.weights_every}};
    doc["topology"] = topology_to_json(cfg.topology);

    nlohmann::json sc;
    if (cfg.scenario == ScenarioKind::kSensing) {
        const auto& s = *cfg.sensing;
        sc["type"] = "sensing";
        sc["num_basis"] = s.num_basis;
        sc["num_freqs"] = s.num_freqs;
        sc["receiver_noise"] = s.receiver_noise;
        sc["impulse"] = {{"alpha", s.impulse_alpha}, {"gamma", s.impulse_gamma}};
        sc["channel"] = s.channel == ChannelProfile::kFlatUnit ? "flat" : "lognormal";
        sc["lognormal_sigma"] = s.lognormal_sigma;
        sc["update"] =
            cfg.block_update == BlockUpdateMode::kAverage ? "block" : "sequential";
        nlohmann::json states = nlohmann::json::object();
        for (const auto& [name, vec] : s.true_weights.per_cluster)
            states[name] = std::vector<double>(vec.data(), vec.data() + vec.size());
        sc["states"] = std::move(states);
    } else {
        sc["type"] =
            cfg.scenario == ScenarioKind::kLocalization ? "localization" : "generic-linear";
        nlohmann::json states = nlohmann::json::object();
        for (const auto& [name, vec] : cfg.topology.states.per_cluster)
            states[name] = std::vector<double>(vec.data(), vec.data() + vec.size());
        sc[cfg.scenario == ScenarioKind::kLocalization ? "targets" : "states"] =
            std::move(states);
        sc["regressor"] = {
            {"style", cfg.regressor_style == RegressorStyle::kIidGaussian
                          ? "iid"
                          : "tapped-delay"},
            {"variance", cfg.sigma_u_sq}};
        // noise is resolved per node; emit explicit arrays
        nlohmann::json noise;
        if (std::holds_alternative<GaussianNoise>(cfg.noise.front())) {
            noise["type"] = "gaussian";
            std::vector<double> var;
            for (const auto& m : cfg.noise) var.push_back(std::get<GaussianNoise>(m).variance);
            noise["variance"] = var;
        } else if (std::holds_alternative<ContaminatedGaussianNoise>(cfg.noise.front())) {
            noise["type"] = "cg";
            std::vector<double> v, g, p;
            for (const auto& m : cfg.noise) {
                const auto& c = std::get<ContaminatedGaussianNoise>(m);
                v.push_back(c.sigma_v_sq);
                g.push_back(c.sigma_g_sq);
                p.push_back(c.p);
            }
            noise["sigma_v_sq"] = v;
            noise["sigma_g_sq"] = g;
            noise["p"] = p;
        } else {
            const auto& a = std::get<AlphaStableNoise>(cfg.noise.front());
            noise["type"] = "alpha-stable";
            noise["alpha"] = a.alpha;
            noise["gamma"] = a.gamma_disp;
        }
        sc["noise"] = std::move(noise);
    }
    doc["scenario"] = std::move(sc);

    std::vector<double> mu, lambda;
    for (const auto& p : cfg.adapt) {
        mu.push_back(p.mu);
        lambda.push_back(p.lambda);
    }
    doc["adapt"] = {{"mu", mu}, {"lambda", lambda}};
    doc["combine"] = {{"nu", cfg.combine.nu},
                      {"rho", cfg.combine.rho},
                      {"removal_count", cfg.combine.removal_count},
                      {"gamma_sq_init", cfg.combine.gamma_sq_init}};
    if (cfg.attack) {
        nlohmann::json attack;
        attack["start_iteration"] = cfg.attack->start_iteration;
        nlohmann::json ms = nlohmann::json::object();
        nlohmann::json mu_a = nlohmann::json::object();
        nlohmann::json per_target = nlohmann::json::object();
        for (const auto& [id, b] : cfg.attack->byzantine) {
            ms[std::to_string(id)] = std::vector<double>(
                b.shared_state.data(), b.shared_state.data() + b.shared_state.size());
            mu_a[std::to_string(id)] = b.mu_a;
            if (!b.per_target.empty()) {
                nlohmann::json victims = nlohmann::json::object();
                for (const auto& [victim, vec] : b.per_target)
                    victims[std::to_string(victim)] =
                        std::vector<double>(vec.data(), vec.data() + vec.size());
                per_target[std::to_string(id)] = std::move(victims);
            }
        }
        attack["malicious_state"] = std::move(ms);
        attack["mu_a"] = std::move(mu_a);
        if (!per_target.empty()) attack["per_target"] = std::move(per_target);
        doc["attack"] = std::move(attack);
    }
    return doc;
}

namespace {

struct RunResult {
    Eigen::MatrixXd sqdev;          // records x num_nodes
    Eigen::MatrixXd attacked_dist;  // records x attacked
    Eigen::MatrixXd final_weights;  // num_nodes x num_nodes
    std::vector<Eigen::MatrixXd> weight_snaps;
    std::optional<DivergenceEvent> divergence;
    double max_simplex_dev = 0.0;
};

std::vector<long> recorded_iterations(long iterations, long every) {
    std::vector<long> out{0};
    for (long t = every; t <= iterations; t += every) out.push_back(t);
    if (out.back() != iterations) out.push_back(iterations);
    return out;
}

std::vector<long> weight_snapshot_iterations(long iterations, long every) {
    std::vector<long> out;
    if (every <= 0 || iterations < 1) return out;
    for (long t = every; t <= iterations; t += every) out.push_back(t);
    if (out.empty() || out.back() != iterations) out.push_back(iterations);
    return out;
}

RunResult run_single(const ExperimentConfig& cfg, const std::vector<long>& records,
                     const std::vector<long>& weight_records,
                     const std::vector<int>& attacked, long run) {
    const Topology& topo = cfg.topology.topo;
    auto data = cfg.make_data_model(run);
    World world(topo, cfg.topology.states, cfg.algorithm, cfg.adapt, cfg.combine, *data,
                cfg.attack ? &*cfg.attack : nullptr, cfg.divergence_threshold, run,
                cfg.block_update);

    RunResult result;
    result.sqdev.setZero(static_cast<long>(records.size()), topo.num_nodes());
    result.attacked_dist.setZero(static_cast<long>(records.size()),
                                 static_cast<long>(attacked.size()));

    auto record = [&](size_t row) {
        for (int i : topo.normal_nodes()) {
            const Eigen::VectorXd& target = cfg.topology.states.state_for(topo, i);
            result.sqdev(static_cast<long>(row), i) =
                (world.estimate(i) - target).squaredNorm();
        }
        for (size_t k = 0; k < attacked.size(); ++k) {
            int i = attacked[k];
            int byz = -1;
            for (int j : topo.neighbors(i))
                if (j != i && topo.is_byzantine(j) && cfg.attack->byzantine.count(j)) {
                    byz = j;
                    break;
                }
            const Eigen::VectorXd& w_a = cfg.attack->target_for(byz, i);
            result.attacked_dist(static_cast<long>(row), static_cast<long>(k)) =
                (world.estimate(i) - w_a).norm();
        }
    };

    size_t next_record = 0, next_weight = 0;
    if (records[next_record] == 0) record(next_record++);
    for (long t = 1; t <= cfg.iterations; ++t) {
        bool alive = world.run_iteration();
        if (next_record < records.size() && records[next_record] == t)
            record(next_record++);
        if (next_weight < weight_records.size() && weight_records[next_weight] == t) {
            result.weight_snaps.push_back(world.weights());
            ++next_weight;
        }
        if (!alive) break;
    }
    result.final_weights = world.weights();
    result.divergence = world.divergence();
    result.max_simplex_dev = world.max_simplex_deviation();
    return result;
}

}  // namespace

MetricsTrace run_experiment(const ExperimentConfig& cfg, int threads) {
    const Topology& topo = cfg.topology.topo;
    auto records = recorded_iterations(cfg.iterations, cfg.msd_every);
    auto attacked = cfg.attacked_nodes();

    auto weight_records = weight_snapshot_iterations(cfg.iterations, cfg.weights_every);

    MetricsTrace trace;
    trace.iterations = records;
    trace.weight_iterations = weight_records;
    trace.attacked = attacked;
    trace.msd_per_node.setZero(static_cast<long>(records.size()), topo.num_nodes());
    trace.attacked_distance.setZero(static_cast<long>(records.size()),
                                    static_cast<long>(attacked.size()));
    trace.final_weights.setZero(topo.num_nodes(), topo.num_nodes());
    trace.weight_snapshots.assign(
        weight_records.size(),
        Eigen::MatrixXd::Zero(topo.num_nodes(), topo.num_nodes()));

    threads = std::max(1, threads);
    long batch_size = static_cast<long>(threads) * 4;

    for (long batch_start = 0; batch_start < cfg.runs; batch_start += batch_size) {
        long batch_end = std::min(cfg.runs, batch_start + batch_size);
        std::vector<RunResult> slots(static_cast<size_t>(batch_end - batch_start));
        std::atomic<long> cursor{batch_start};
        auto worker = [&]() {
            for (;;) {
                long run = cursor.fetch_add(1);
                if (run >= batch_end) break;
                slots[static_cast<size_t>(run - batch_start)] =
                    run_single(cfg, records, weight_records, attacked, run);
            }
        };
        if (threads == 1 || batch_end - batch_start == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            int k = std::min<long>(threads, batch_end - batch_start);
            pool.reserve(static_cast<size_t>(k));
            for (int w = 0; w < k; ++w) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        // deterministic ordered reduction by run index
        for (auto& result : slots) {
            trace.max_simplex_deviation =
                std::max(trace.max_simplex_deviation, result.max_simplex_dev);
            if (result.divergence) {
                trace.divergent_runs.push_back(*result.divergence);
                continue;
            }
            trace.msd_per_node += result.sqdev;
            trace.attacked_distance += result.attacked_dist;
            trace.final_weights += result.final_weights;
            for (size_t k = 0; k < result.weight_snaps.size(); ++k)
                trace.weight_snapshots[k] += result.weight_snaps[k];
            ++trace.completed_runs;
        }
    }

    if (trace.completed_runs > 0) {
        double inv = 1.0 / static_cast<double>(trace.completed_runs);
        trace.msd_per_node *= inv;
        trace.attacked_distance *= inv;
        trace.final_weights *= inv;
        for (auto& snap : trace.weight_snapshots) snap *= inv;
    }

    const auto& normal = topo.normal_nodes();
    trace.msd_network.resize(records.size());
    trace.msd_network_db.resize(records.size());
    for (size_t r = 0; r < records.size(); ++r) {
        double sum = 0.0;
        for (int i : normal) sum += trace.msd_per_node(static_cast<long>(r), i);
        double mean = sum / static_cast<double>(normal.size());
        trace.msd_network[r] = mean;
        trace.msd_network_db[r] = 10.0 * std::log10(mean);
    }

    trace.subnetworks =
        subnetwork_partition(trace.final_weights, topo, cfg.edge_threshold);
    trace.msd_subnetwork.assign(records.size(),
                                std::vector<double>(trace.subnetworks.size(), 0.0));
    for (size_t r = 0; r < records.size(); ++r)
        for (size_t s = 0; s < trace.subnetworks.size(); ++s) {
            double sum = 0.0;
            for (int i : trace.subnetworks[s])
                sum += trace.msd_per_node(static_cast<long>(r), i);
            trace.msd_subnetwork[r][s] =
                sum / static_cast<double>(trace.subnetworks[s].size());
        }
    return trace;
}

std::vector<std::vector<int>> subnetwork_partition(const Eigen::MatrixXd& final_weights,
                                                   const Topology& topo,
                                                   double edge_threshold) {
    const auto& normal = topo.normal_nodes();
    std::set<int> remaining(normal.begin(), normal.end());
    std::vector<std::vector<int>> components;
    while (!remaining.empty()) {
        int start = *remaining.begin();
        std::vector<int> stack{start};
        std::vector<int> comp;
        remaining.erase(start);
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            comp.push_back(v);
            for (int w : topo.neighbors(v)) {
                if (w == v || !remaining.count(w)) continue;
                if (final_weights(v, w) > edge_threshold ||
                    final_weights(w, v) > edge_threshold) {
                    remaining.erase(w);
                    stack.push_back(w);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
    }
    std::sort(components.begin(), components.end());
    return components;
}

nlohmann::json emit_outputs(const MetricsTrace& trace, const ExperimentConfig& cfg,
                            const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    auto open = [&dir](const std::string& name) {
        std::ofstream out(fs::path(dir) / name);
        if (!out)
            throw std::runtime_error("emit_outputs: cannot write '" + name + "' in " + dir);
        return out;
    };
    bool have_rows = trace.completed_runs > 0;

    {
        auto out = open("msd_network.csv");
        out << "iteration,msd_db\n";
        if (have_rows)
            for (size_t r = 0; r < trace.iterations.size(); ++r)
                out << trace.iterations[r] << ',' << format_double(trace.msd_network_db[r])
                    << '\n';
    }
    {
        auto out = open("msd_per_node.csv");
        out << "iteration,node,msd\n";
        if (have_rows)
            for (size_t r = 0; r < trace.iterations.size(); ++r)
                for (int i : cfg.topology.topo.normal_nodes())
                    out << trace.iterations[r] << ',' << i << ','
                        << format_double(trace.msd_per_node(static_cast<long>(r), i))
                        << '\n';
    }
    {
        auto out = open("attacked_distance.csv");
        out << "iteration,node,distance\n";
        if (have_rows)
            for (size_t r = 0; r < trace.iterations.size(); ++r)
                for (size_t k = 0; k < trace.attacked.size(); ++k)
                    out << trace.iterations[r] << ',' << trace.attacked[k] << ','
                        << format_double(trace.attacked_distance(static_cast<long>(r),
                                                                 static_cast<long>(k)))
                        << '\n';
    }
    {
        auto out = open("weights_final.csv");
        out << "j,i,weight\n";
        if (have_rows)
            for (int i = 0; i < cfg.topology.topo.num_nodes(); ++i)
                for (int j : cfg.topology.topo.neighbors(i))
                    out << j << ',' << i << ','
                        << format_double(trace.final_weights(i, j)) << '\n';
    }

    if (!trace.weight_snapshots.empty()) {
        auto out = open("weights_snapshots.csv");
        out << "iteration,j,i,weight\n";
        if (have_rows)
            for (size_t k = 0; k < trace.weight_iterations.size(); ++k)
                for (int i = 0; i < cfg.topology.topo.num_nodes(); ++i)
                    for (int j : cfg.topology.topo.neighbors(i))
                        out << trace.weight_iterations[k] << ',' << j << ',' << i << ','
                            << format_double(trace.weight_snapshots[k](i, j)) << '\n';
    }

    nlohmann::json manifest;
    manifest["config"] = resolved_json(cfg);
    manifest["seed"] = cfg.seed;
    manifest["content_hash"] = sha1_hex(manifest["config"].dump());
    manifest["completed_runs"] = trace.completed_runs;
    manifest["max_simplex_deviation"] = trace.max_simplex_deviation;
    manifest["subnetworks"] = trace.subnetworks;
    manifest["divergent_runs"] = nlohmann::json::array();
    for (const auto& d : trace.divergent_runs)
        manifest["divergent_runs"].push_back(
            {{"run", d.run}, {"iteration", d.iteration}, {"node", d.node}});
    manifest["outputs"] = {"msd_network.csv", "msd_per_node.csv", "attacked_distance.csv",
                           "weights_final.csv"};
    {
        auto out = open("manifest.json");
        out << manifest.dump(2) << '\n';
    }
    return manifest;
}

TheoryInputs theory_inputs_from(const ExperimentConfig& cfg) {
    if (cfg.scenario == ScenarioKind::kSensing)
        throw std::invalid_argument(
            "theory: the sensing scenario uses heavy-tailed noise with no finite "
            "variance");
    TheoryInputs in = steady_state_inputs(cfg.topology.topo);
    int n = in.normal_topology.num_nodes();
    in.dim = cfg.topology.states.dim();
    in.mu.resize(n);
    in.sigma_u_sq.resize(n);
    in.sigma_eta_sq.resize(n);
    for (int k = 0; k < n; ++k) {
        int orig = in.original_ids[static_cast<size_t>(k)];
        in.mu[k] = cfg.adapt[static_cast<size_t>(orig)].mu;
        in.sigma_u_sq[k] = cfg.sigma_u_sq[static_cast<size_t>(orig)];
        const NoiseModel& m = cfg.noise[static_cast<size_t>(orig)];
        if (!has_finite_variance(m))
            throw std::invalid_argument("theory: noise variance must be finite");
        in.sigma_eta_sq[k] = noise_variance(m);
    }
    if (kernel_of(cfg.algorithm) == Kernel::kLms) {
        in.lambda = 0.0;
    } else {
        in.lambda = cfg.adapt.front().lambda;
        for (const auto& p : cfg.adapt)
            if (p.lambda != in.lambda)
                throw std::invalid_argument(
                    "theory: per-node lambda values must agree");
    }
    in.removal_count =
        is_resilient(cfg.algorithm) ? cfg.combine.removal_count : 0;
    in.validate();
    return in;
}

}  // namespace diffnet
