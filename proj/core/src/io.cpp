#include "frf/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace frf::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json matrix_to_json(const MatrixXcd& m) {
    json re = json::array(), im = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            re.push_back(m(i, j).real());
            im.push_back(m(i, j).imag());
        }
    return json{{"re", re}, {"im", im}};
}

MatrixXcd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
    MatrixXcd m(rows, cols);
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    if (static_cast<Eigen::Index>(re.size()) != rows * cols)
        throw std::runtime_error("frf file: matrix size mismatch");
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j2 = 0; j2 < cols; ++j2, ++idx)
            m(i, j2) = cplx(re[idx].get<double>(), im[idx].get<double>());
    return m;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void atomic_write(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

void write_time_record(const fs::path& csv_path, const TimeRecord& rec,
                       const TimeRecordMeta& meta) {
    std::ostringstream out;
    out << "t";
    for (int i = 0; i < rec.n_u(); ++i) out << ",u" << (i + 1);
    for (int i = 0; i < rec.n_y(); ++i) out << ",y" << (i + 1);
    for (int i = 0; i < rec.n_r(); ++i) out << ",r" << (i + 1);
    out << "\n";
    const double Ts = 1.0 / rec.sample_rate;
    for (Eigen::Index k = 0; k < rec.samples(); ++k) {
        out << fmt(k * Ts);
        for (int i = 0; i < rec.n_u(); ++i) out << "," << fmt(rec.u(i, k));
        for (int i = 0; i < rec.n_y(); ++i) out << "," << fmt(rec.y(i, k));
        for (int i = 0; i < rec.n_r(); ++i) out << "," << fmt(rec.r(i, k));
        out << "\n";
    }
    atomic_write(csv_path, out.str());

    json j{{"sample_rate", meta.sample_rate},
           {"period_samples", meta.period_samples},
           {"n_periods", meta.n_periods},
           {"settle_periods", meta.settle_periods},
           {"seed", meta.seed}};
    atomic_write(csv_path.string() + ".meta.json", j.dump(2) + "\n");
}

std::pair<TimeRecord, TimeRecordMeta> read_time_record(const fs::path& csv_path) {
    const json j = json::parse(read_file(csv_path.string() + ".meta.json"));
    TimeRecordMeta meta;
    meta.sample_rate = j.at("sample_rate").get<double>();
    meta.period_samples = j.at("period_samples").get<int>();
    meta.n_periods = j.at("n_periods").get<int>();
    meta.settle_periods = j.at("settle_periods").get<int>();
    meta.seed = j.at("seed").get<std::uint64_t>();

    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open " + csv_path.string());
    std::string header;
    std::getline(in, header);
    int nu = 0, ny = 0, nr = 0;
    {
        std::stringstream hs(header);
        std::string col;
        while (std::getline(hs, col, ',')) {
            if (col.rfind('u', 0) == 0) ++nu;
            else if (col.rfind('y', 0) == 0) ++ny;
            else if (col.rfind('r', 0) == 0) ++nr;
        }
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
        if (static_cast<int>(vals.size()) != 1 + nu + ny + nr)
            throw std::runtime_error("time record: ragged row in " + csv_path.string());
        rows.push_back(std::move(vals));
    }
    TimeRecord rec;
    const auto T = static_cast<Eigen::Index>(rows.size());
    rec.u.resize(nu, T);
    rec.y.resize(ny, T);
    rec.r.resize(nr, T);
    for (Eigen::Index k = 0; k < T; ++k) {
        int at = 1;
        for (int i = 0; i < nu; ++i) rec.u(i, k) = rows[k][at++];
        for (int i = 0; i < ny; ++i) rec.y(i, k) = rows[k][at++];
        for (int i = 0; i < nr; ++i) rec.r(i, k) = rows[k][at++];
    }
    rec.sample_rate = meta.sample_rate;
    rec.n_periods = meta.n_periods;
    rec.settle_periods = meta.settle_periods;
    return {rec, meta};
}

void write_frf_estimate(const fs::path& path, const FrfEstimate& est) {
    json lines = json::array();
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    for (int k = 0; k < est.n_lines(); ++k) {
        const FrfLine& l = est.lines[k];
        json jl{{"freq_hz", est.freqs(k) / kTwoPi},
                {"valid", l.valid},
                {"g", matrix_to_json(l.G)}};
        if (l.cov.size() > 0) jl["cov"] = matrix_to_json(l.cov);
        if (l.resid_cov.size() > 0) jl["resid_cov"] = matrix_to_json(l.resid_cov);
        lines.push_back(std::move(jl));
    }
    json j{{"format", "frf-estimate"},
           {"version", 1},
           {"method", est.method_tag},
           {"n_e_used", est.n_e_used},
           {"n_y", est.n_y()},
           {"n_u", est.n_u()},
           {"lines", lines}};
    atomic_write(path, j.dump(2) + "\n");
}

FrfEstimate read_frf_estimate(const fs::path& path) {
    const json j = json::parse(read_file(path));
    if (j.at("format") != "frf-estimate")
        throw std::runtime_error("not an frf-estimate file: " + path.string());
    FrfEstimate est;
    est.method_tag = j.at("method").get<std::string>();
    est.n_e_used = j.at("n_e_used").get<int>();
    const int ny = j.at("n_y").get<int>(), nu = j.at("n_u").get<int>();
    const auto& lines = j.at("lines");
    est.freqs.resize(lines.size());
    est.lines.resize(lines.size());
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    for (size_t k = 0; k < lines.size(); ++k) {
        const auto& jl = lines[k];
        est.freqs(k) = jl.at("freq_hz").get<double>() * kTwoPi;
        est.lines[k].valid = jl.at("valid").get<bool>();
        est.lines[k].G = matrix_from_json(jl.at("g"), ny, nu);
        if (jl.contains("cov"))
            est.lines[k].cov = matrix_from_json(jl.at("cov"), ny * nu, ny * nu);
        if (jl.contains("resid_cov"))
            est.lines[k].resid_cov = matrix_from_json(jl.at("resid_cov"), ny, ny);
    }
    return est;
}

void write_fit_result(const fs::path& path, const graybox::FitResult& fit,
                      const std::vector<std::string>& parameter_names) {
    const VectorXd th = fit.theta_hat.pack();
    json params = json::array();
    for (Eigen::Index i = 0; i < th.size(); ++i)
        params.push_back(json{{"name", parameter_names[i]}, {"value", th(i)}});
    json starts = json::array();
    for (const auto& s : fit.starts) {
        json js{{"cost", s.cost}, {"iterations", s.iterations}, {"converged", s.converged}};
        js["theta_init"] = std::vector<double>(s.theta_init.data(),
                                               s.theta_init.data() + s.theta_init.size());
        if (s.theta_final.size() > 0)
            js["theta_final"] = std::vector<double>(s.theta_final.data(),
                                                    s.theta_final.data() + s.theta_final.size());
        starts.push_back(std::move(js));
    }
    json j{{"format", "fit-result"},
           {"version", 1},
           {"theta_hat", params},
           {"cost", fit.cost},
           {"cost_trace", fit.cost_trace},
           {"starts", starts}};
    atomic_write(path, j.dump(2) + "\n");
}

}  // namespace frf::io
