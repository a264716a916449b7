#include "njode/observation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace njode {

ObservationFramework::ObservationFramework(int d_x, double horizon, std::vector<double> times,
                                           std::vector<Vec> values, std::vector<Mask> masks)
    : d_x_(d_x), horizon_(horizon), times_(std::move(times)), values_(std::move(values)),
      masks_(std::move(masks)) {
    if (d_x_ < 1) throw config_error("ObservationFramework: d_x must be >= 1");
    if (horizon_ <= 0) throw config_error("ObservationFramework: horizon must be > 0");
    if (times_.empty() || times_[0] != 0.0)
        throw config_error("ObservationFramework: first observation time must be 0");
    if (times_.size() != values_.size() || times_.size() != masks_.size())
        throw config_error("ObservationFramework: times/values/masks size mismatch");
    for (size_t i = 0; i < times_.size(); ++i) {
        if (i > 0 && !(times_[i] > times_[i - 1]))
            throw config_error("ObservationFramework: observation times must be strictly increasing");
        if (times_[i] > horizon_)
            throw config_error("ObservationFramework: observation time beyond horizon");
        if (static_cast<int>(values_[i].size()) != d_x_ || static_cast<int>(masks_[i].size()) != d_x_)
            throw config_error("ObservationFramework: value/mask dimension mismatch");
        for (int j = 0; j < d_x_; ++j) {
            if (masks_[i][j] > 1) throw config_error("ObservationFramework: mask entries must be 0/1");
            if (i == 0 && masks_[0][j] != 1)
                throw config_error("ObservationFramework: path must be completely observed at time 0");
            if (!masks_[i][j]) values_[i][j] = 0.0;  // convention: unobserved coords stored as 0
        }
    }
}

void ObservationFramework::set_grid(int n_grid, std::vector<int> time_idx) {
    if (n_grid < 1) throw config_error("set_grid: n_grid must be >= 1");
    if (time_idx.size() != times_.size()) throw config_error("set_grid: index count mismatch");
    const double h = horizon_ / n_grid;
    for (size_t i = 0; i < time_idx.size(); ++i) {
        if (time_idx[i] < 0 || time_idx[i] > n_grid || std::abs(time_idx[i] * h - times_[i]) > 1e-9)
            throw config_error("set_grid: grid index does not match observation time");
    }
    n_grid_ = n_grid;
    time_idx_ = std::move(time_idx);
}

void ObservationFramework::set_x_true(std::vector<Vec> x) {
    if (x.size() != times_.size()) throw config_error("set_x_true: size mismatch");
    x_true_ = std::move(x);
}

double tau(const ObservationFramework& fw, double t) {
    double last = 0.0;
    for (double ti : fw.times()) {
        if (ti <= t) last = ti;
        else break;
    }
    return last;
}

double tau_masked(const ObservationFramework& fw, double t, int coord) {
    double last = 0.0;
    for (size_t i = 0; i < fw.times().size(); ++i) {
        if (fw.times()[i] > t) break;
        if (fw.masks()[i][coord]) last = fw.times()[i];
    }
    return last;
}

double tau_masked_strict(const ObservationFramework& fw, double t, int coord) {
    double last = 0.0;
    for (size_t i = 0; i < fw.times().size(); ++i) {
        if (fw.times()[i] >= t) break;
        if (fw.masks()[i][coord]) last = fw.times()[i];
    }
    return last;
}

namespace {

// a(s,t,j): index of the last time <= min(s,t) at which coordinate j was
// observed. Exists because every coordinate is observed at t_0 = 0.
int last_observed_index(const ObservationFramework& fw, double bound, int coord) {
    int a = 0;
    for (size_t i = 0; i < fw.times().size(); ++i) {
        if (fw.times()[i] > bound) break;
        if (fw.masks()[i][coord]) a = static_cast<int>(i);
    }
    return a;
}

// b(s,t,j): index of the first time in [s, t] at which coordinate j is
// observed, or -1 if there is none.
int next_observed_index(const ObservationFramework& fw, double s, double t, int coord) {
    for (size_t i = 0; i < fw.times().size(); ++i) {
        if (fw.times()[i] < s) continue;
        if (fw.times()[i] > t) break;
        if (fw.masks()[i][coord]) return static_cast<int>(i);
    }
    return -1;
}

// count of coordinate observations up to and including time bound
double count_up_to(const ObservationFramework& fw, double bound, int coord) {
    double u = 0;
    for (size_t i = 0; i < fw.times().size(); ++i) {
        if (fw.times()[i] > bound) break;
        if (fw.masks()[i][coord]) u += 1.0;
    }
    return u;
}

}  // namespace

Vec interpolate(const ObservationFramework& fw, double t, double s) {
    const int d = fw.d_x();
    Vec out(2 * d + 1, 0.0);
    for (int j = 0; j < d; ++j) {
        const int a = last_observed_index(fw, std::min(s, t), j);
        const int b = next_observed_index(fw, s, t, j);
        const double x_a = fw.values()[a][j];
        if (b >= 1 && fw.times()[b - 1] < s) {
            // forward interpolation toward the next observed value, starting
            // only after the preceding (global) observation time: no leakage
            const double tb = fw.times()[b], tbm = fw.times()[b - 1];
            const double w = (s - tbm) / (tb - tbm);
            out[j] = x_a * (1.0 - w) + fw.values()[b][j] * w;
            // count ramps from its pre-t_b value so it stays continuous at t_b
            out[d + j] = count_up_to(fw, tb, j) - 1.0 + w;
        } else {
            out[j] = x_a;
            out[d + j] = count_up_to(fw, fw.times()[a], j);
        }
    }
    out[2 * d] = s;
    return out;
}

InterpolatedPath vertex_list(const ObservationFramework& fw, double t) {
    InterpolatedPath path;
    for (double ti : fw.times()) {
        if (ti > t) break;
        path.params.push_back(ti);
    }
    if (path.params.empty() || path.params.back() < t) path.params.push_back(t);
    for (double s : path.params) path.vertices.push_back(interpolate(fw, t, s));
    return path;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

using nlohmann::json;

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("save_dataset: cannot open " + path);
    json h;
    h["type"] = "njode-dataset";
    h["version"] = 1;
    h["d_x"] = ds.header.d_x;
    h["T"] = ds.header.horizon;
    h["n_grid"] = ds.header.n_grid;
    h["generator"] = ds.header.generator;
    h["seed"] = ds.header.seed;
    h["n_paths"] = ds.header.n_paths;
    h["generator_config"] = ds.header.generator_config;
    h["noise_std"] = ds.header.noise_std;
    h["corr"] = ds.header.corr;
    out << h.dump() << "\n";
    for (const auto& fw : ds.paths) {
        json r;
        r["times"] = fw.times();
        r["values"] = fw.values();
        json m = json::array();
        for (const auto& mk : fw.masks()) {
            json row = json::array();
            for (uint8_t v : mk) row.push_back(static_cast<int>(v));
            m.push_back(row);
        }
        r["masks"] = m;
        if (fw.n_grid() > 0) r["time_idx"] = fw.time_idx();
        if (fw.has_noise_record()) r["x_true"] = fw.x_true();
        out << r.dump() << "\n";
    }
    if (!out) throw config_error("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("load_dataset: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw config_error("load_dataset: empty file " + path);
    json h = json::parse(line);
    if (h.value("type", "") != "njode-dataset")
        throw config_error("load_dataset: not an njode dataset: " + path);
    Dataset ds;
    ds.header.d_x = h.at("d_x").get<int>();
    ds.header.horizon = h.at("T").get<double>();
    ds.header.n_grid = h.at("n_grid").get<int>();
    ds.header.generator = h.at("generator").get<std::string>();
    ds.header.seed = h.at("seed").get<uint64_t>();
    ds.header.n_paths = h.at("n_paths").get<int>();
    ds.header.generator_config = h.value("generator_config", std::string{});
    ds.header.noise_std = h.value("noise_std", Vec{});
    ds.header.corr = h.value("corr", 0.0);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json r = json::parse(line);
        std::vector<double> times = r.at("times").get<std::vector<double>>();
        std::vector<Vec> values = r.at("values").get<std::vector<Vec>>();
        std::vector<Mask> masks;
        for (const auto& row : r.at("masks")) {
            Mask mk;
            for (const auto& v : row) mk.push_back(static_cast<uint8_t>(v.get<int>()));
            masks.push_back(std::move(mk));
        }
        ObservationFramework fw(ds.header.d_x, ds.header.horizon, std::move(times),
                                std::move(values), std::move(masks));
        if (r.contains("time_idx")) fw.set_grid(ds.header.n_grid, r.at("time_idx").get<std::vector<int>>());
        if (r.contains("x_true")) fw.set_x_true(r.at("x_true").get<std::vector<Vec>>());
        ds.paths.push_back(std::move(fw));
    }
    if (static_cast<int>(ds.paths.size()) != ds.header.n_paths)
        throw config_error("load_dataset: path count mismatch in " + path);
    return ds;
}

}  // namespace njode
