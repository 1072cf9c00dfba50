#include "ppt/io.hpp"

#include <json.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace ppt::io {
namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value for '" + key + "': " + v);
    }
}

}  // namespace

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : parse_double(key, it->second);
}

int Config::get_int(const std::string& key, int fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    const double d = parse_double(key, it->second);
    if (d != std::floor(d)) throw ConfigError("config: '" + key + "' must be an integer");
    return static_cast<int>(d);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::uint64_t v = 0;
    const auto& s = it->second;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ConfigError("config: '" + key + "' must be an unsigned integer");
    return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    const std::string v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: '" + key + "' must be a boolean");
}

std::vector<double> Config::get_list(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return {};
    const std::string& v = it->second;
    std::vector<double> out;
    if (v.find(':') != std::string::npos) {
        const auto parts = split(v, ':');
        if (parts.size() != 3) throw ConfigError("config: '" + key + "' range must be lo:step:hi");
        const double lo = parse_double(key, parts[0]);
        const double step = parse_double(key, parts[1]);
        const double hi = parse_double(key, parts[2]);
        if (!(step > 0.0) || hi < lo) throw ConfigError("config: bad range for '" + key + "'");
        for (double x = lo; x <= hi + 1e-9 * step; x += step) out.push_back(x);
        return out;
    }
    for (const auto& item : split(v, ',')) {
        if (!item.empty()) out.push_back(parse_double(key, item));
    }
    return out;
}

Config parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(lineno));
        kv[key] = value;
    }
    return Config(std::move(kv));
}

Config load_config(const std::string& path) {
    return parse_config(read_text(path));
}

ExperimentConfig experiment_from_config(const Config& cfg) {
    static const std::set<std::string> known = {
        "N", "T_low", "T_high", "Tp", "Ts", "A", "pr", "snr_db", "trials",
        "master_seed", "estimators", "Kh_max", "T_search_low", "T_search_high",
        "fft_size", "snr_definition", "rho", "threads", "snap_to_grid",
        // synth-only keys tolerated so one file can drive both commands
        "T", "tau0", "sigma2", "seed", "snr_db_single"};
    for (const auto& [k, v] : cfg.entries()) {
        if (!known.count(k)) throw ConfigError("config: unknown key '" + k + "'");
    }
    ExperimentConfig e;
    e.N = cfg.get_int("N", e.N);
    e.T_low = cfg.get_double("T_low", e.T_low);
    e.T_high = cfg.get_double("T_high", e.T_high);
    e.Tp = cfg.get_double("Tp", e.Tp);
    e.Ts = cfg.get_double("Ts", e.Ts);
    e.A = cfg.get_double("A", e.A);
    e.P_R = cfg.get_int("pr", e.P_R);
    if (cfg.has("snr_db")) e.snr_db = cfg.get_list("snr_db");
    e.trials = cfg.get_int("trials", e.trials);
    e.master_seed = cfg.get_u64("master_seed", e.master_seed);
    if (cfg.has("estimators")) {
        e.estimators.clear();
        for (const auto& name : split(cfg.get_string("estimators", ""), ',')) {
            const auto m = method_from_name(name);
            if (!m) throw ConfigError("config: unknown estimator '" + name + "'");
            e.estimators.push_back(*m);
        }
    }
    e.Kh_max = cfg.get_int("Kh_max", e.Kh_max);
    e.T_search_low = cfg.get_double("T_search_low", e.T_search_low);
    e.T_search_high = cfg.get_double("T_search_high", e.T_search_high);
    e.fft_size = cfg.get_int("fft_size", e.fft_size);
    const std::string conv = cfg.get_string("snr_definition",
                                            snr_convention_name(e.snr_convention));
    const auto c = snr_convention_from_name(conv);
    if (!c) throw ConfigError("config: unknown snr_definition '" + conv + "'");
    e.snr_convention = *c;
    e.order_penalty_rho = cfg.get_double("rho", e.order_penalty_rho);
    e.threads = cfg.get_int("threads", e.threads);
    e.snap_to_grid = cfg.get_bool("snap_to_grid", e.snap_to_grid);
    return e;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    // Shortest representation that round-trips; keeps result files compact
    // and byte-stable.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_signal(const std::string& csv_path, const Measurement& meas,
                  const std::string& snr_definition,
                  std::optional<double> Tp, std::optional<int> P_R) {
    std::string body = "n,x\n";
    for (std::size_t n = 0; n < meas.x.size(); ++n)
        body += std::to_string(n) + "," + format_double(meas.x[n]) + "\n";
    write_text(csv_path, body);

    nlohmann::json j;
    j["Ts"] = meas.Ts;
    j["sigma2"] = meas.sigma2;
    j["seed"] = meas.seed;
    j["snr_definition"] = snr_definition;
    if (Tp) j["Tp"] = *Tp;
    if (P_R) j["pr"] = *P_R;
    if (meas.truth) {
        j["truth"] = {{"T", meas.truth->T}, {"tau0", meas.truth->tau0}, {"A", meas.truth->A}};
    }
    write_text(csv_path + ".meta.json", j.dump(2) + "\n");
}

Measurement read_signal(const std::string& csv_path) {
    const std::string text = read_text(csv_path);
    Measurement meas;
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line) || trim(line) != "n,x")
        throw IoError("signal file missing 'n,x' header: " + csv_path);
    while (std::getline(ss, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw IoError("malformed signal row: " + line);
        meas.x.push_back(parse_double("x", line.substr(comma + 1)));
    }

    const std::string meta_path = csv_path + ".meta.json";
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(meta_path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad sidecar " + meta_path + ": " + e.what());
    }
    meas.Ts = j.value("Ts", 1.0);
    meas.sigma2 = j.value("sigma2", 0.0);
    meas.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("truth")) {
        PulseTrainParams p;
        p.T = j["truth"].value("T", 0.0);
        p.tau0 = j["truth"].value("tau0", 0.0);
        p.A = j["truth"].value("A", 1.0);
        meas.truth = p;
    }
    return meas;
}

std::string results_csv(const MseCurve& curve) {
    std::string out = "snr_db,method,mse,crlb_model1,crlb_mhus,trials,failures\n";
    for (std::size_t s = 0; s < curve.snr_db.size(); ++s) {
        for (std::size_t mi = 0; mi < curve.methods.size(); ++mi) {
            const auto& cell = curve.cells[mi][s];
            out += format_double(curve.snr_db[s]);
            out += ",";
            out += method_name(curve.methods[mi]);
            out += ",";
            out += format_double(cell.mse);
            out += ",";
            out += format_double(curve.crlb_model1[s]);
            out += ",";
            out += format_double(curve.crlb_mhus[s]);
            out += ",";
            out += std::to_string(cell.trials);
            out += ",";
            out += std::to_string(cell.failures);
            out += "\n";
        }
    }
    return out;
}

void write_results(const std::string& path, const MseCurve& curve) {
    write_text(path, results_csv(curve));
}

std::string manifest_text(const ExperimentConfig& cfg, const std::string& status,
                          const std::string& timestamp) {
    std::string out;
    out += "artifact = pulsetrain 0.1.0\n";
    out += "status = " + status + "\n";
    out += "timestamp = " + timestamp + "\n";
    out += "N = " + std::to_string(cfg.N) + "\n";
    out += "T_low = " + format_double(cfg.T_low) + "\n";
    out += "T_high = " + format_double(cfg.T_high) + "\n";
    out += "Tp = " + format_double(cfg.Tp) + "\n";
    out += "Ts = " + format_double(cfg.Ts) + "\n";
    out += "A = " + format_double(cfg.A) + "\n";
    out += "pr = " + std::to_string(cfg.P_R) + "\n";
    std::string snrs;
    for (double s : cfg.snr_db) {
        if (!snrs.empty()) snrs += ",";
        snrs += format_double(s);
    }
    out += "snr_db = " + snrs + "\n";
    out += "trials = " + std::to_string(cfg.trials) + "\n";
    out += "master_seed = " + std::to_string(cfg.master_seed) + "\n";
    std::string est;
    for (Method m : cfg.estimators) {
        if (!est.empty()) est += ",";
        est += method_name(m);
    }
    out += "estimators = " + est + "\n";
    out += "Kh_max = " + std::to_string(cfg.Kh_max) + "\n";
    out += "T_search_low = " + format_double(cfg.T_search_low) + "\n";
    out += "T_search_high = " + format_double(cfg.T_search_high) + "\n";
    out += "fft_size = " + std::to_string(cfg.fft_size) + "\n";
    out += std::string("snr_definition = ") + snr_convention_name(cfg.snr_convention) + "\n";
    out += "rho = " + format_double(cfg.order_penalty_rho) + "\n";
    out += "threads = " + std::to_string(cfg.threads) + "\n";
    out += std::string("snap_to_grid = ") + (cfg.snap_to_grid ? "true" : "false") + "\n";
    return out;
}

}  // namespace ppt::io
