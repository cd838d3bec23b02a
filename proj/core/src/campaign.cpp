#include "frf/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "frf/classical.hpp"
#include "frf/io.hpp"
#include "frf/metrics.hpp"
#include "frf/rng.hpp"

namespace frf::campaign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
}

VectorXd get_vector(const json& j, const std::string& key) {
    const auto& arr = j.at(key);
    VectorXd v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
    return v;
}

std::vector<int> get_ints(const json& j, const std::string& key) {
    std::vector<int> v;
    for (const auto& e : j.at(key)) v.push_back(e.get<int>());
    return v;
}

json to_json(const VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

plant::ThetaVector parse_theta(const json& j, const std::string& where) {
    check_keys(j, {"k_g", "d_g", "k_e", "d_e"}, where);
    plant::ThetaVector t;
    t.k_g = get_vector(j, "k_g");
    t.d_g = get_vector(j, "d_g");
    t.k_e = j.contains("k_e") ? get_vector(j, "k_e") : VectorXd(0);
    t.d_e = j.contains("d_e") ? get_vector(j, "d_e") : VectorXd(0);
    return t;
}

json theta_to_json(const plant::ThetaVector& t) {
    return json{{"k_g", to_json(t.k_g)},
                {"d_g", to_json(t.d_g)},
                {"k_e", to_json(t.k_e)},
                {"d_e", to_json(t.d_e)}};
}

std::vector<plant::SinusoidalHarmonic> parse_harmonics(const json& arr, const std::string& where) {
    std::vector<plant::SinusoidalHarmonic> out;
    for (const auto& h : arr) {
        check_keys(h, {"order", "amplitude", "phase"}, where);
        plant::SinusoidalHarmonic sh;
        sh.order = h.at("order").get<double>();
        sh.amplitude = h.at("amplitude").get<double>();
        sh.phase = h.contains("phase") ? h.at("phase").get<double>() : 0.0;
        out.push_back(sh);
    }
    return out;
}

json harmonics_to_json(const std::vector<plant::SinusoidalHarmonic>& hs) {
    json arr = json::array();
    for (const auto& h : hs)
        arr.push_back(json{{"order", h.order}, {"amplitude", h.amplitude}, {"phase", h.phase}});
    return arr;
}

local::LocalFitConfig parse_local(const json& j) {
    check_keys(j, {"order", "half_width", "offset_scaling", "rank_tol"}, "estimators[].local");
    local::LocalFitConfig c;
    if (j.contains("order")) c.order_R = j.at("order").get<int>();
    if (j.contains("half_width")) c.half_width_b = j.at("half_width").get<int>();
    if (j.contains("offset_scaling")) {
        const std::string s = j.at("offset_scaling").get<std::string>();
        if (s == "raw") c.offset_scaling = local::OffsetScaling::Raw;
        else if (s == "normalized") c.offset_scaling = local::OffsetScaling::Normalized;
        else throw std::invalid_argument("config: offset_scaling must be raw|normalized");
    }
    if (j.contains("rank_tol")) c.rank_tol = j.at("rank_tol").get<double>();
    return c;
}

json local_to_json(const local::LocalFitConfig& c) {
    return json{{"order", c.order_R},
                {"half_width", c.half_width_b},
                {"offset_scaling",
                 c.offset_scaling == local::OffsetScaling::Raw ? "raw" : "normalized"},
                {"rank_tol", c.rank_tol}};
}

}  // namespace

bool EstimatorSpec::is_local() const {
    return method == "LPM" || method == "LRM_MISO" || method == "LRM_MIMO" ||
           method == "JIO_LRM";
}

std::string EstimatorSpec::cell_name() const {
    std::string name = method + "_ne" + std::to_string(n_e);
    if (!is_local()) name += "_M" + std::to_string(M);
    return name;
}

int CampaignConfig::max_experiments() const {
    int n = 0;
    for (const auto& e : estimators) n = std::max(n, e.n_e);
    return n;
}

void CampaignConfig::validate() const {
    plant.validate();
    if (estimators.empty()) throw std::invalid_argument("config: no estimators");
    static const std::set<std::string> methods{"H1", "ARI", "LOG", "JIO",
                                              "LPM", "LRM_MISO", "LRM_MIMO", "JIO_LRM"};
    for (const auto& e : estimators) {
        if (!methods.count(e.method))
            throw std::invalid_argument("config: unknown estimator method " + e.method);
        if (e.n_e < 1) throw std::invalid_argument("config: estimator n_e must be >= 1");
        if (!e.is_local() && e.n_e != e.M * plant.n_axes)
            throw std::invalid_argument("config: classical estimator " + e.method +
                                        " requires n_e = M * n_u");
    }
    if (!configurations.random && configurations.list.empty())
        throw std::invalid_argument("config: no configurations");
    if (configurations.random && configurations.count < 1)
        throw std::invalid_argument("config: random configuration count must be >= 1");
    if (multisine.orthogonal_blocks && max_experiments() % plant.n_axes != 0)
        throw std::invalid_argument(
            "config: experiment count must be a multiple of n_u for orthogonal blocks");
}

CampaignConfig parse_config(const std::string& json_text) {
    const json j = json::parse(json_text);
    check_keys(j,
               {"schema_version", "seed", "output_dir", "plant", "controller", "disturbances",
                "multisine", "simulation", "configurations", "estimators", "graybox"},
               "top level");
    CampaignConfig cfg;
    cfg.schema_version = j.at("schema_version").get<int>();
    if (cfg.schema_version != 1)
        throw std::invalid_argument("config: unsupported schema_version");
    cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

    {
        const json& p = j.at("plant");
        check_keys(p,
                   {"n_axes", "motor_inertia", "gear_ratio_inv", "link_mass", "link_length",
                    "link_com", "link_inertia", "viscous_friction", "gravity", "theta",
                    "elastic_axes", "elastic_inertia", "cubic_axes", "cubic_stiffness"},
                   "plant");
        auto& m = cfg.plant;
        m.n_axes = p.at("n_axes").get<int>();
        m.motor_inertia = get_vector(p, "motor_inertia");
        m.gear_ratio_inv = get_vector(p, "gear_ratio_inv");
        m.link_mass = get_vector(p, "link_mass");
        m.link_length = get_vector(p, "link_length");
        m.link_com = get_vector(p, "link_com");
        m.link_inertia = get_vector(p, "link_inertia");
        m.viscous_friction = get_vector(p, "viscous_friction");
        m.gravity = p.at("gravity").get<double>();
        m.theta = parse_theta(p.at("theta"), "plant.theta");
        m.elastic_axes = p.contains("elastic_axes") ? get_ints(p, "elastic_axes")
                                                    : std::vector<int>{};
        m.elastic_inertia =
            p.contains("elastic_inertia") ? get_vector(p, "elastic_inertia") : VectorXd(0);
        m.cubic_axes = p.contains("cubic_axes") ? get_ints(p, "cubic_axes") : std::vector<int>{};
        m.cubic_stiffness =
            p.contains("cubic_stiffness") ? get_vector(p, "cubic_stiffness") : VectorXd(0);
    }
    {
        const json& c = j.at("controller");
        check_keys(c, {"kp", "kv", "ki", "torque_limit"}, "controller");
        cfg.controller.kp = get_vector(c, "kp");
        cfg.controller.kv = get_vector(c, "kv");
        cfg.controller.ki = get_vector(c, "ki");
        cfg.controller.torque_limit = get_vector(c, "torque_limit");
    }
    {
        const json& d = j.at("disturbances");
        check_keys(d, {"position_noise_std", "torque_ripple", "position_harmonics"},
                   "disturbances");
        cfg.disturbances.position_noise_std = get_vector(d, "position_noise_std");
        if (d.contains("torque_ripple"))
            cfg.disturbances.torque_ripple =
                parse_harmonics(d.at("torque_ripple"), "disturbances.torque_ripple");
        if (d.contains("position_harmonics"))
            cfg.disturbances.position_harmonics =
                parse_harmonics(d.at("position_harmonics"), "disturbances.position_harmonics");
    }
    {
        const json& m = j.at("multisine");
        check_keys(m,
                   {"sample_rate", "period_samples", "f_min_hz", "f_max_hz", "n_lines",
                    "line_selection", "explicit_bins", "amplitude", "orthogonal_blocks",
                    "offset_sine"},
                   "multisine");
        auto& ms = cfg.multisine;
        ms.sample_rate = m.at("sample_rate").get<double>();
        ms.period_samples = m.at("period_samples").get<int>();
        ms.f_min_hz = m.at("f_min_hz").get<double>();
        ms.f_max_hz = m.at("f_max_hz").get<double>();
        ms.n_lines = m.at("n_lines").get<int>();
        if (m.contains("line_selection")) {
            const std::string s = m.at("line_selection").get<std::string>();
            if (s == "log_spaced_odd") ms.selection = sigproc::LineSelection::LogSpacedOdd;
            else if (s == "explicit") ms.selection = sigproc::LineSelection::Explicit;
            else throw std::invalid_argument("config: line_selection must be log_spaced_odd|explicit");
        }
        if (m.contains("explicit_bins")) ms.explicit_bins = get_ints(m, "explicit_bins");
        const VectorXd amp = get_vector(m, "amplitude");
        ms.amplitudes.assign(amp.data(), amp.data() + amp.size());
        ms.orthogonal_blocks = m.at("orthogonal_blocks").get<bool>();
        if (m.contains("offset_sine")) {
            check_keys(m.at("offset_sine"), {"frequency_hz", "amplitude"}, "multisine.offset_sine");
            sigproc::OffsetSine os;
            os.frequency_hz = m.at("offset_sine").at("frequency_hz").get<double>();
            os.amplitude = m.at("offset_sine").at("amplitude").get<double>();
            ms.offset_sine = os;
        }
        ms.n_inputs = cfg.plant.n_axes;
    }
    {
        const json& s = j.at("simulation");
        check_keys(s, {"n_periods", "settle_periods", "reference_scale"}, "simulation");
        cfg.simulation.n_periods = s.at("n_periods").get<int>();
        cfg.simulation.settle_periods = s.at("settle_periods").get<int>();
        if (s.contains("reference_scale"))
            cfg.simulation.reference_scale = s.at("reference_scale").get<double>();
    }
    {
        const json& c = j.at("configurations");
        check_keys(c, {"mode", "count", "range", "list"}, "configurations");
        const std::string mode = c.at("mode").get<std::string>();
        if (mode == "random") {
            cfg.configurations.random = true;
            cfg.configurations.count = c.at("count").get<int>();
            if (c.contains("range")) {
                const VectorXd r = get_vector(c, "range");
                if (r.size() != 2) throw std::invalid_argument("config: range must be [lo, hi]");
                cfg.configurations.range_lo = r(0);
                cfg.configurations.range_hi = r(1);
            }
        } else if (mode == "explicit") {
            for (const auto& q : c.at("list")) {
                VectorXd v(q.size());
                for (size_t i = 0; i < q.size(); ++i) v(i) = q[i].get<double>();
                cfg.configurations.list.push_back(v);
            }
        } else {
            throw std::invalid_argument("config: configurations.mode must be random|explicit");
        }
    }
    for (const auto& e : j.at("estimators")) {
        check_keys(e, {"method", "n_e", "M", "fit", "local"}, "estimators[]");
        EstimatorSpec spec;
        spec.method = e.at("method").get<std::string>();
        spec.n_e = e.at("n_e").get<int>();
        if (e.contains("M")) spec.M = e.at("M").get<int>();
        if (e.contains("fit")) spec.fit = e.at("fit").get<bool>();
        if (e.contains("local")) spec.local = parse_local(e.at("local"));
        cfg.estimators.push_back(spec);
    }
    {
        const json& g = j.at("graybox");
        check_keys(g, {"theta0", "n_starts", "perturbation", "max_iterations", "weights"},
                   "graybox");
        cfg.graybox.theta0 = parse_theta(g.at("theta0"), "graybox.theta0");
        if (g.contains("n_starts")) cfg.graybox.n_starts = g.at("n_starts").get<int>();
        if (g.contains("perturbation"))
            cfg.graybox.perturbation = g.at("perturbation").get<double>();
        if (g.contains("max_iterations"))
            cfg.graybox.max_iterations = g.at("max_iterations").get<int>();
        if (g.contains("weights")) {
            const json& w = g.at("weights");
            check_keys(w, {"diagonal_boost", "band_boost", "band_halfwidth"}, "graybox.weights");
            if (w.contains("diagonal_boost"))
                cfg.graybox.weights.diagonal_boost = w.at("diagonal_boost").get<double>();
            if (w.contains("band_boost"))
                cfg.graybox.weights.band_boost = w.at("band_boost").get<double>();
            if (w.contains("band_halfwidth"))
                cfg.graybox.weights.band_halfwidth = w.at("band_halfwidth").get<double>();
        }
    }
    cfg.validate();
    return cfg;
}

CampaignConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const CampaignConfig& cfg) {
    json j;
    j["schema_version"] = cfg.schema_version;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    {
        const auto& m = cfg.plant;
        json p{{"n_axes", m.n_axes},
               {"motor_inertia", to_json(m.motor_inertia)},
               {"gear_ratio_inv", to_json(m.gear_ratio_inv)},
               {"link_mass", to_json(m.link_mass)},
               {"link_length", to_json(m.link_length)},
               {"link_com", to_json(m.link_com)},
               {"link_inertia", to_json(m.link_inertia)},
               {"viscous_friction", to_json(m.viscous_friction)},
               {"gravity", m.gravity},
               {"theta", theta_to_json(m.theta)},
               {"elastic_axes", m.elastic_axes},
               {"elastic_inertia", to_json(m.elastic_inertia)},
               {"cubic_axes", m.cubic_axes},
               {"cubic_stiffness", to_json(m.cubic_stiffness)}};
        j["plant"] = std::move(p);
    }
    j["controller"] = json{{"kp", to_json(cfg.controller.kp)},
                           {"kv", to_json(cfg.controller.kv)},
                           {"ki", to_json(cfg.controller.ki)},
                           {"torque_limit", to_json(cfg.controller.torque_limit)}};
    j["disturbances"] =
        json{{"position_noise_std", to_json(cfg.disturbances.position_noise_std)},
             {"torque_ripple", harmonics_to_json(cfg.disturbances.torque_ripple)},
             {"position_harmonics", harmonics_to_json(cfg.disturbances.position_harmonics)}};
    {
        const auto& ms = cfg.multisine;
        json m{{"sample_rate", ms.sample_rate},
               {"period_samples", ms.period_samples},
               {"f_min_hz", ms.f_min_hz},
               {"f_max_hz", ms.f_max_hz},
               {"n_lines", ms.n_lines},
               {"line_selection",
                ms.selection == sigproc::LineSelection::LogSpacedOdd ? "log_spaced_odd"
                                                                     : "explicit"},
               {"amplitude", ms.amplitudes},
               {"orthogonal_blocks", ms.orthogonal_blocks}};
        if (ms.selection == sigproc::LineSelection::Explicit) m["explicit_bins"] = ms.explicit_bins;
        if (ms.offset_sine)
            m["offset_sine"] = json{{"frequency_hz", ms.offset_sine->frequency_hz},
                                    {"amplitude", ms.offset_sine->amplitude}};
        j["multisine"] = std::move(m);
    }
    j["simulation"] = json{{"n_periods", cfg.simulation.n_periods},
                           {"settle_periods", cfg.simulation.settle_periods},
                           {"reference_scale", cfg.simulation.reference_scale}};
    {
        json c;
        if (cfg.configurations.random) {
            c["mode"] = "random";
            c["count"] = cfg.configurations.count;
            c["range"] = json::array({cfg.configurations.range_lo, cfg.configurations.range_hi});
        } else {
            c["mode"] = "explicit";
            json list = json::array();
            for (const auto& q : cfg.configurations.list) list.push_back(to_json(q));
            c["list"] = std::move(list);
        }
        j["configurations"] = std::move(c);
    }
    {
        json arr = json::array();
        for (const auto& e : cfg.estimators) {
            json je{{"method", e.method}, {"n_e", e.n_e}, {"fit", e.fit}};
            if (!e.is_local()) je["M"] = e.M;
            else je["local"] = local_to_json(e.local);
            arr.push_back(std::move(je));
        }
        j["estimators"] = std::move(arr);
    }
    j["graybox"] = json{{"theta0", theta_to_json(cfg.graybox.theta0)},
                        {"n_starts", cfg.graybox.n_starts},
                        {"perturbation", cfg.graybox.perturbation},
                        {"max_iterations", cfg.graybox.max_iterations},
                        {"weights", json{{"diagonal_boost", cfg.graybox.weights.diagonal_boost},
                                         {"band_boost", cfg.graybox.weights.band_boost},
                                         {"band_halfwidth", cfg.graybox.weights.band_halfwidth}}}};
    return j.dump(2) + "\n";
}

std::vector<VectorXd> resolve_configurations(const CampaignConfig& cfg) {
    if (!cfg.configurations.random) return cfg.configurations.list;
    std::vector<VectorXd> out;
    for (int c = 0; c < cfg.configurations.count; ++c) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(c), 0, kSeedRoleConfigDraw));
        VectorXd q(cfg.plant.n_axes);
        for (int i = 0; i < cfg.plant.n_axes; ++i)
            q(i) = rng.uniform(cfg.configurations.range_lo, cfg.configurations.range_hi);
        out.push_back(q);
    }
    return out;
}

namespace {

std::string cfg_dirname(int c) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "cfg%03d", c);
    return buf;
}

std::string exp_filename(int e) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "exp%03d.csv", e);
    return buf;
}

void parallel_over(int n, int jobs, const std::function<void(int)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::future<void>> futs;
    const int workers = std::min(jobs, n);
    for (int w = 0; w < workers; ++w)
        futs.push_back(std::async(std::launch::async, [=, &fn] {
            for (int i = w; i < n; i += workers) fn(i);
        }));
    for (auto& f : futs) f.get();
}

VectorXd excited_freqs(const sigproc::MultisineSpec& ms) {
    const auto bins = ms.excited_bins();
    VectorXd freqs(bins.size());
    for (size_t i = 0; i < bins.size(); ++i) freqs(i) = kTwoPi * ms.bin_hz(bins[i]);
    return freqs;
}

FrfEstimate estimate_cell(const SpectralRecord& full, const EstimatorSpec& spec) {
    const SpectralRecord rec = full.experiments(0, spec.n_e);
    if (!spec.is_local()) {
        const auto blocks = classical::ExperimentBlocks::of(rec, spec.M);
        if (spec.method == "H1") return classical::h1_estimate(rec, blocks);
        if (spec.method == "ARI") return classical::ari_estimate(rec, blocks);
        if (spec.method == "LOG") return classical::log_estimate(rec, blocks);
        if (spec.method == "JIO") return classical::jio_classical(rec, blocks);
        throw std::logic_error("unknown classical method " + spec.method);
    }
    std::vector<FrfEstimate> per_exp;
    for (int m = 0; m < spec.n_e; ++m) {
        const SpectralRecord one = rec.experiment(m);
        if (spec.method == "LPM") per_exp.push_back(local::lpm_fit(one, spec.local));
        else if (spec.method == "LRM_MISO") per_exp.push_back(local::lrm_miso_fit(one, spec.local));
        else if (spec.method == "LRM_MIMO") per_exp.push_back(local::lrm_mimo_fit(one, spec.local));
        else if (spec.method == "JIO_LRM") per_exp.push_back(local::jio_lrm(one, spec.local));
        else throw std::logic_error("unknown local method " + spec.method);
    }
    FrfEstimate est = spec.n_e == 1 ? per_exp[0] : local::log_average_local(per_exp);
    est.method_tag = spec.method;  // cell-stable tag for downstream reports
    est.n_e_used = spec.n_e;
    return est;
}

}  // namespace

StageReport run_simulate(const CampaignConfig& cfg, const fs::path& out, int jobs) {
    cfg.validate();
    const auto configs = resolve_configurations(cfg);
    const int n_exp = cfg.max_experiments();
    StageReport rep;
    std::mutex mu;

    parallel_over(static_cast<int>(configs.size()), jobs, [&](int c) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const VectorXd freqs = excited_freqs(cfg.multisine);
            const FrfEstimate truth = plant::true_frf(cfg.plant, configs[c], freqs);
            io::write_frf_estimate(out / "truth" / (cfg_dirname(c) + ".frf.json"), truth);

            sigproc::MultisineSpec ms = cfg.multisine;
            ms.phase_seed = derive_seed(cfg.seed, c, 0, kSeedRolePhase);
            auto signals = sigproc::design_multisine(ms, n_exp);

            plant::SimulationOptions opt;
            opt.sample_rate = ms.sample_rate;
            opt.period_samples = ms.period_samples;
            opt.n_periods = cfg.simulation.n_periods;
            opt.settle_periods = cfg.simulation.settle_periods;

            for (int e = 0; e < n_exp; ++e) {
                plant::DisturbanceConfig dist = cfg.disturbances;
                dist.noise_seed = derive_seed(cfg.seed, c, e, kSeedRoleNoise);
                const MatrixXd ref = cfg.simulation.reference_scale * signals[e];
                const auto sim = plant::simulate_closed_loop(cfg.plant, cfg.controller, dist,
                                                             ref, configs[c], opt);
                io::TimeRecordMeta meta{ms.sample_rate, ms.period_samples,
                                        opt.n_periods, opt.settle_periods, dist.noise_seed};
                io::write_time_record(out / "data" / cfg_dirname(c) / exp_filename(e),
                                      sim.record, meta);
                if (sim.saturation_warning) {
                    std::lock_guard<std::mutex> lock(mu);
                    rep.notes.push_back(cfg_dirname(c) + "/" + exp_filename(e) +
                                        ": torque saturation in > 1% of samples");
                }
            }
        } catch (const std::exception& ex) {
            std::lock_guard<std::mutex> lock(mu);
            rep.ok = false;
            rep.failures.push_back(cfg_dirname(c) + ": " + ex.what());
        }
        std::lock_guard<std::mutex> lock(mu);
        rep.notes.push_back(
            cfg_dirname(c) + " simulated in " +
            std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                               .count()) +
            " s");
    });
    return rep;
}

StageReport run_estimate(const CampaignConfig& cfg, const fs::path& out, int jobs) {
    cfg.validate();
    const auto configs = resolve_configurations(cfg);
    const int n_exp = cfg.max_experiments();
    StageReport rep;
    std::mutex mu;

    parallel_over(static_cast<int>(configs.size()), jobs, [&](int c) {
        try {
            std::vector<SpectralRecord> per_exp;
            for (int e = 0; e < n_exp; ++e) {
                const auto [record, meta] =
                    io::read_time_record(out / "data" / cfg_dirname(c) / exp_filename(e));
                per_exp.push_back(sigproc::to_spectral(record, cfg.multisine));
            }
            const SpectralRecord full = merge_experiments(per_exp);
            for (const auto& spec : cfg.estimators) {
                const auto t0 = std::chrono::steady_clock::now();
                FrfEstimate est = estimate_cell(full, spec);
                io::write_frf_estimate(
                    out / "estimates" / cfg_dirname(c) / (spec.cell_name() + ".frf.json"), est);
                std::lock_guard<std::mutex> lock(mu);
                rep.notes.push_back(
                    cfg_dirname(c) + "/" + spec.cell_name() + " in " +
                    std::to_string(
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                            .count()) +
                    " s");
            }
        } catch (const std::exception& ex) {
            std::lock_guard<std::mutex> lock(mu);
            rep.ok = false;
            rep.failures.push_back(cfg_dirname(c) + ": " + ex.what());
        }
    });
    return rep;
}

StageReport run_fit(const CampaignConfig& cfg, const fs::path& out, int jobs) {
    cfg.validate();
    const auto configs = resolve_configurations(cfg);
    StageReport rep;
    std::mutex mu;

    std::vector<int> fit_cells;
    for (size_t i = 0; i < cfg.estimators.size(); ++i)
        if (cfg.estimators[i].fit) fit_cells.push_back(static_cast<int>(i));

    parallel_over(static_cast<int>(fit_cells.size()), jobs, [&](int idx) {
        const EstimatorSpec& spec = cfg.estimators[fit_cells[idx]];
        try {
            std::vector<FrfEstimate> ests;
            for (size_t c = 0; c < configs.size(); ++c) {
                FrfEstimate est = io::read_frf_estimate(
                    out / "estimates" / cfg_dirname(static_cast<int>(c)) /
                    (spec.cell_name() + ".frf.json"));
                if (2 * est.valid_count() < est.n_lines())
                    throw std::runtime_error(spec.cell_name() + " in " +
                                             cfg_dirname(static_cast<int>(c)) +
                                             ": more than 50% of lines invalid, fit refused");
                ests.push_back(std::move(est));
            }
            plant::PlantModel skeleton = cfg.plant;
            skeleton.theta = cfg.graybox.theta0;
            const auto weights =
                graybox::build_weights(ests, skeleton, configs, cfg.graybox.weights);
            graybox::FitOptions opt;
            opt.n_starts = cfg.graybox.n_starts;
            opt.perturbation = cfg.graybox.perturbation;
            opt.max_iterations = cfg.graybox.max_iterations;
            opt.seed = derive_seed(cfg.seed, fit_cells[idx], 0, kSeedRoleFitStarts);
            const auto fit = graybox::fit_parameters(ests, skeleton, configs,
                                                     cfg.graybox.theta0, weights, opt);
            io::write_fit_result(out / "fits" / (spec.cell_name() + ".fit.json"), fit,
                                 cfg.graybox.theta0.names());
            std::lock_guard<std::mutex> lock(mu);
            rep.notes.push_back(spec.cell_name() + " fitted in " +
                                std::to_string(fit.wall_time_s) + " s, cost " +
                                std::to_string(fit.cost));
        } catch (const std::exception& ex) {
            std::lock_guard<std::mutex> lock(mu);
            rep.ok = false;
            rep.failures.push_back(spec.cell_name() + std::string(": ") + ex.what());
        }
    });
    return rep;
}

StageReport run_report(const CampaignConfig& cfg, const fs::path& out) {
    cfg.validate();
    const auto configs = resolve_configurations(cfg);
    StageReport rep;
    try {
        std::vector<FrfEstimate> truths;
        for (size_t c = 0; c < configs.size(); ++c)
            truths.push_back(io::read_frf_estimate(
                out / "truth" / (cfg_dirname(static_cast<int>(c)) + ".frf.json")));

        plant::PlantModel skeleton = cfg.plant;
        skeleton.theta = cfg.graybox.theta0;
        const auto scheme =
            graybox::build_weights(truths, skeleton, configs, cfg.graybox.weights);
        std::vector<std::vector<MatrixXd>> metricW;
        for (const auto& per_cfg : scheme.weights)
            metricW.push_back(metrics::metric_weights(per_cfg));

        // Table-I-style matrix: rows n_e descending, one column per method.
        std::vector<std::string> methods;
        for (const auto& e : cfg.estimators)
            if (std::find(methods.begin(), methods.end(), e.method) == methods.end())
                methods.push_back(e.method);
        std::set<int, std::greater<int>> ne_values;
        for (const auto& e : cfg.estimators) ne_values.insert(e.n_e);

        std::map<std::string, double> bias_by_cell;
        std::map<std::string, std::vector<FrfEstimate>> ests_by_cell;
        for (const auto& e : cfg.estimators) {
            std::vector<FrfEstimate> ests;
            for (size_t c = 0; c < configs.size(); ++c)
                ests.push_back(io::read_frf_estimate(
                    out / "estimates" / cfg_dirname(static_cast<int>(c)) /
                    (e.cell_name() + ".frf.json")));
            const auto biasrep = metrics::frf_amplitude_bias_report(truths, ests, metricW);
            bias_by_cell[e.cell_name()] = biasrep.grand_average;
            ests_by_cell[e.cell_name()] = std::move(ests);
        }

        std::ostringstream table;
        table << "FRF amplitude bias, averaged over " << configs.size() << " configurations\n";
        table << "n_e";
        for (const auto& m : methods) table << "\t" << m;
        table << "\n";
        table.setf(std::ios::fixed);
        table.precision(6);
        for (int ne : ne_values) {
            table << ne;
            for (const auto& m : methods) {
                std::string cell;
                for (const auto& e : cfg.estimators)
                    if (e.method == m && e.n_e == ne) cell = e.cell_name();
                if (cell.empty()) table << "\t-";
                else table << "\t" << bias_by_cell[cell];
            }
            table << "\n";
        }
        io::atomic_write(out / "report" / "frf_bias.txt", table.str());

        // Table-II-style parameter bias for every fitted cell.
        std::ostringstream ptable;
        ptable << "Parameter bias vs true theta\n";
        ptable << "cell\tB_theta\n";
        ptable.setf(std::ios::fixed);
        ptable.precision(6);
        for (const auto& e : cfg.estimators) {
            if (!e.fit) continue;
            const fs::path fit_path = out / "fits" / (e.cell_name() + ".fit.json");
            if (!fs::exists(fit_path)) {
                ptable << e.cell_name() << "\t(missing)\n";
                continue;
            }
            const json jf = json::parse(std::ifstream(fit_path));
            VectorXd th(jf.at("theta_hat").size());
            for (size_t i = 0; i < jf.at("theta_hat").size(); ++i)
                th(i) = jf.at("theta_hat")[i].at("value").get<double>();
            const auto pb = metrics::parameter_bias(cfg.plant.theta.pack(), th);
            ptable << e.cell_name() << "\t" << pb.mean << "\n";
        }
        io::atomic_write(out / "report" / "param_bias.txt", ptable.str());

        // Plot data: per configuration and channel, truth vs every method.
        for (size_t c = 0; c < configs.size(); ++c) {
            const FrfEstimate& truth = truths[c];
            for (int i = 0; i < truth.n_y(); ++i) {
                for (int jch = 0; jch < truth.n_u(); ++jch) {
                    std::ostringstream curve;
                    curve << "# freq_hz\tmag_truth\tphase_truth";
                    for (const auto& e : cfg.estimators)
                        curve << "\tmag_" << e.cell_name() << "\tphase_" << e.cell_name();
                    curve << "\n";
                    for (int k = 0; k < truth.n_lines(); ++k) {
                        char buf[64];
                        std::snprintf(buf, sizeof(buf), "%.17g", truth.freqs(k) / kTwoPi);
                        curve << buf;
                        auto emit = [&](const cplx& g) {
                            std::snprintf(buf, sizeof(buf), "\t%.17g\t%.17g", std::abs(g),
                                          std::arg(g));
                            curve << buf;
                        };
                        emit(truth.lines[k].G(i, jch));
                        for (const auto& e : cfg.estimators)
                            emit(ests_by_cell[e.cell_name()][c].lines[k].G(i, jch));
                        curve << "\n";
                    }
                    char name[64];
                    std::snprintf(name, sizeof(name), "cfg%03d_G%d%d.dat",
                                  static_cast<int>(c), i + 1, jch + 1);
                    io::atomic_write(out / "report" / "curves" / name, curve.str());
                }
            }
        }
    } catch (const std::exception& ex) {
        rep.ok = false;
        rep.failures.push_back(ex.what());
    }
    return rep;
}

}  // namespace frf::campaign
