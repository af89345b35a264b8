#pragma once

// The central measurement artifact: sampled Loschmidt-echo values with their
// acquisition metadata.  Serializes to CSV (time,value,shots) and JSON; both
// round-trip bit-exactly (17 significant digits).

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gentle/common.hpp"

namespace gentle {

struct NoiseMeta {
    double gamma = 0.0;                                      // depolarizing rate
    double T_a = 0.0;                                        // preparation time
    double beta = std::numeric_limits<double>::infinity();   // inverse temperature; inf = pure
    std::uint64_t dim = 0;                                   // Hilbert dimension; 0 = unknown
    std::uint64_t seed = 0;
    bool corrected = false;        // echo-verification applied
    bool floor_included = true;    // identity-floor term kept in the damping law
};

struct EchoRecord {
    std::vector<double> times;
    std::vector<double> values;
    long shots_per_point = 0; // 0 = exact
    NoiseMeta noise;
    std::string unit = "g";

    std::size_t size() const { return times.size(); }

    void validate() const {
        if (times.size() != values.size())
            throw invalid_argument_error("echo record: times/values length mismatch");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw invalid_argument_error("echo record: times must be strictly increasing");
    }

    // Sub-record with times <= t_max (used by the windowed analysis).
    EchoRecord truncated(double t_max) const {
        EchoRecord out = *this;
        out.times.clear();
        out.values.clear();
        for (std::size_t i = 0; i < times.size(); ++i)
            if (times[i] <= t_max + 1e-12) {
                out.times.push_back(times[i]);
                out.values.push_back(values[i]);
            }
        return out;
    }
};

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string to_csv(const EchoRecord& rec) {
    std::ostringstream os;
    os << "time,value,shots\n";
    for (std::size_t i = 0; i < rec.times.size(); ++i)
        os << format_g17(rec.times[i]) << ',' << format_g17(rec.values[i]) << ','
           << rec.shots_per_point << '\n';
    return os.str();
}

inline EchoRecord from_csv(const std::string& csv) {
    EchoRecord rec;
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line); // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        double t, v;
        long m;
        if (std::sscanf(line.c_str(), "%lg,%lg,%ld", &t, &v, &m) != 3)
            throw invalid_argument_error("echo record CSV: malformed row: " + line);
        rec.times.push_back(t);
        rec.values.push_back(v);
        rec.shots_per_point = m;
    }
    return rec;
}

inline nlohmann::json to_json(const NoiseMeta& m) {
    nlohmann::json j;
    j["gamma"] = m.gamma;
    j["T_a"] = m.T_a;
    if (std::isinf(m.beta))
        j["beta"] = nullptr;
    else
        j["beta"] = m.beta;
    j["dim"] = m.dim;
    j["seed"] = m.seed;
    j["corrected"] = m.corrected;
    j["floor_included"] = m.floor_included;
    return j;
}

inline NoiseMeta noise_meta_from_json(const nlohmann::json& j) {
    NoiseMeta m;
    m.gamma = j.at("gamma").get<double>();
    m.T_a = j.at("T_a").get<double>();
    m.beta = j.at("beta").is_null() ? std::numeric_limits<double>::infinity()
                                    : j.at("beta").get<double>();
    m.dim = j.at("dim").get<std::uint64_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.corrected = j.at("corrected").get<bool>();
    m.floor_included = j.at("floor_included").get<bool>();
    return m;
}

inline nlohmann::json to_json(const EchoRecord& rec) {
    nlohmann::json j;
    j["times"] = rec.times;
    j["values"] = rec.values;
    j["shots_per_point"] = rec.shots_per_point;
    j["noise"] = to_json(rec.noise);
    j["unit"] = rec.unit;
    return j;
}

inline EchoRecord echo_from_json(const nlohmann::json& j) {
    EchoRecord rec;
    rec.times = j.at("times").get<std::vector<double>>();
    rec.values = j.at("values").get<std::vector<double>>();
    rec.shots_per_point = j.at("shots_per_point").get<long>();
    rec.noise = noise_meta_from_json(j.at("noise"));
    rec.unit = j.at("unit").get<std::string>();
    return rec;
}

} // namespace gentle
