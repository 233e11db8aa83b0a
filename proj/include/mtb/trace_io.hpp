#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mtb/bandit.hpp"
#include "mtb/errors.hpp"

namespace mtb {

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Default trace resolution: full for short runs, every 10th step beyond 1e5.
inline int default_thin(std::int64_t horizon) { return horizon <= 100000 ? 1 : 10; }

/// Writes a trace as delimited text: one metadata comment, a header row, and
/// one row per retained step (every `thin`-th step plus always the final one).
/// The cumulative columns are exact running sums regardless of thinning.
inline void write_trace(const std::string& path, const RegretTrace& trace, int thin = 1) {
    if (thin < 1) throw InvalidInput("write_trace: thin must be at least 1");
    std::ofstream out(path);
    if (!out) throw InvalidInput("write_trace: cannot open " + path);
    out << "# algorithm=" << trace.algorithm << " seed=" << trace.seed
        << " config_hash=" << (trace.config_hash.empty() ? "-" : trace.config_hash) << "\n";
    out << "seed,algorithm,t,instance,arm,regret_step,regret_cum_global,regret_cum_instance\n";
    const std::size_t n = trace.steps.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = trace.steps[i];
        if (s.t % thin != 0 && i + 1 != n) continue;
        out << trace.seed << ',' << trace.algorithm << ',' << s.t << ',' << s.instance << ','
            << s.arm << ',' << format_g17(s.regret) << ',' << format_g17(s.cum_global) << ','
            << format_g17(s.cum_instance) << '\n';
    }
    if (!out) throw InvalidInput("write_trace: write failed for " + path);
}

inline RegretTrace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("read_trace: cannot open " + path);
    RegretTrace trace;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string token;
            while (meta >> token) {
                auto eq = token.find('=');
                if (eq == std::string::npos) continue;
                auto key = token.substr(0, eq);
                auto val = token.substr(eq + 1);
                if (key == "algorithm") trace.algorithm = val;
                if (key == "seed") trace.seed = std::stoull(val);
                if (key == "config_hash" && val != "-") trace.config_hash = val;
            }
            continue;
        }
        if (!header_seen) {
            header_seen = true;  // column header
            continue;
        }
        TraceStep step{};
        std::istringstream row(line);
        std::string field;
        int col = 0;
        while (std::getline(row, field, ',')) {
            switch (col) {
                case 0: trace.seed = std::stoull(field); break;
                case 1: trace.algorithm = field; break;
                case 2: step.t = std::stoll(field); break;
                case 3: step.instance = std::stoi(field); break;
                case 4: step.arm = std::stoi(field); break;
                case 5: step.regret = std::stod(field); break;
                case 6: step.cum_global = std::stod(field); break;
                case 7: step.cum_instance = std::stod(field); break;
                default: throw InvalidInput("read_trace: too many columns in " + path);
            }
            ++col;
        }
        if (col != 8) throw InvalidInput("read_trace: malformed row in " + path);
        trace.steps.push_back(step);
    }
    if (!header_seen) throw InvalidInput("read_trace: no header in " + path);
    return trace;
}

struct CurvePoint {
    std::int64_t t;
    double mean;
    double ci_half;  // half width of the normal-approximation 95% band
};

struct AlgorithmSummary {
    int n_seeds = 0;
    std::vector<CurvePoint> curve;  // cumulative regret across the thinned grid
    double final_mean = 0.0;
    double final_ci_half = 0.0;
    double mean_wallclock_s = 0.0;
};

using SummaryStats = std::map<std::string, AlgorithmSummary>;

inline std::pair<double, double> mean_ci(const std::vector<double>& vals) {
    const double n = static_cast<double>(vals.size());
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= n;
    if (vals.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / (n - 1.0));
    return {mean, 1.96 * sd / std::sqrt(n)};
}

/// Mean cumulative-regret curve and 95% confidence band per algorithm. All
/// traces of one algorithm must share the same step grid (they do whenever
/// they come from one experiment config).
inline SummaryStats summarize_traces(const std::vector<RegretTrace>& traces) {
    std::map<std::string, std::vector<const RegretTrace*>> by_algo;
    for (const auto& tr : traces) by_algo[tr.algorithm].push_back(&tr);

    SummaryStats stats;
    for (const auto& [algo, group] : by_algo) {
        const auto& grid = group.front()->steps;
        for (const auto* tr : group) {
            if (tr->steps.size() != grid.size()) {
                throw InvalidInput("summarize: traces for " + algo + " have mismatched grids");
            }
        }
        AlgorithmSummary summary;
        summary.n_seeds = static_cast<int>(group.size());
        summary.curve.reserve(grid.size());
        std::vector<double> vals(group.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            for (std::size_t g = 0; g < group.size(); ++g) {
                if (group[g]->steps[i].t != grid[i].t) {
                    throw InvalidInput("summarize: traces for " + algo + " have mismatched grids");
                }
                vals[g] = group[g]->steps[i].cum_global;
            }
            auto [mean, ci] = mean_ci(vals);
            summary.curve.push_back({grid[i].t, mean, ci});
        }
        for (std::size_t g = 0; g < group.size(); ++g) vals[g] = group[g]->final_regret();
        auto [fm, fci] = mean_ci(vals);
        summary.final_mean = fm;
        summary.final_ci_half = fci;
        double wall = 0.0;
        for (const auto* tr : group) wall += tr->wallclock_s;
        summary.mean_wallclock_s = wall / static_cast<double>(group.size());
        stats[algo] = summary;
    }
    return stats;
}

}  // namespace mtb
