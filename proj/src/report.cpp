#include "misim/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "misim/pooling.hpp"

namespace misim::report {

namespace {

const char* kMethodColors[6] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                "#d62728", "#9467bd", "#8c564b"};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(std::move(field));
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void emit_csv(const std::vector<mc::ScenarioSummary>& summaries, const std::string& path) {
    if (summaries.empty()) throw std::invalid_argument("emit_csv: no summaries");
    auto out = open_out(path);
    out << "n,n_sim,iter,p_ext,p_miss,rho,branch,method,"
           "bias_b0,bias_b1,bias_b2,rmse_b0,rmse_b1,rmse_b2,cov_b0,cov_b1,cov_b2,"
           "mse_mean,mse_var,mse_q025,mse_q50,mse_q975\n";
    for (const auto& s : summaries) {
        const auto& sc = s.scenario;
        for (const auto& row : s.rows) {
            out << sc.n << ',' << sc.n_sim << ',' << sc.M << ',' << format_double(sc.p_ext)
                << ',' << format_double(sc.p_miss) << ',' << format_double(sc.rho) << ','
                << mc::branch_name(row.branch) << ',' << imputers::method_name(row.method);
            for (int j = 0; j < 3; ++j) out << ',' << format_double(row.coef.bias[j]);
            for (int j = 0; j < 3; ++j) out << ',' << format_double(row.coef.rmse[j]);
            for (int j = 0; j < 3; ++j) out << ',' << format_double(row.coef.coverage[j]);
            out << ',' << format_double(row.mse.mean) << ',' << format_double(row.mse.variance)
                << ',' << format_double(row.mse.q025) << ',' << format_double(row.mse.q50) << ','
                << format_double(row.mse.q975) << '\n';
        }
    }
}

void emit_replicates_csv(const std::vector<mc::Scenario>& scenarios,
                         const std::vector<std::vector<mc::ReplicateRecord>>& replicates,
                         const std::string& path) {
    auto out = open_out(path);
    out << "scenario,rep,branch,method,cv_mse\n";
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        for (const auto& rr : replicates[s]) {
            for (const auto& cell : rr.cells) {
                out << scenarios[s].key() << ',' << rr.rep << ',' << mc::branch_name(cell.branch)
                    << ',' << imputers::method_name(cell.method) << ','
                    << format_double(cell.cv_mse) << '\n';
            }
        }
    }
}

void emit_qq_csv(const std::vector<mc::ScenarioSummary>& summaries, const std::string& path) {
    auto out = open_out(path);
    out << "scenario,branch,method,percentile,true_q,pred_q\n";
    for (const auto& s : summaries) {
        for (const auto& row : s.rows) {
            for (std::size_t g = 0; g < row.qq.true_q.size(); ++g) {
                out << s.scenario.key() << ',' << mc::branch_name(row.branch) << ','
                    << imputers::method_name(row.method) << ',' << (g + 1) << ','
                    << format_double(row.qq.true_q[g]) << ',' << format_double(row.qq.pred_q[g])
                    << '\n';
            }
        }
    }
}

std::string dataset_csv(const synth::Dataset& d) {
    std::ostringstream out;
    out << "y,x1,x2,x2_missing,contaminated\n";
    std::vector<bool> cont(d.n(), false);
    for (std::size_t i : d.contaminated_rows) cont[i] = true;
    for (std::size_t i = 0; i < d.n(); ++i) {
        out << format_double(d.y[i]) << ',' << format_double(d.x1[i]) << ','
            << format_double(d.x2[i]) << ',' << (d.x2_mask[i] ? 1 : 0) << ',' << (cont[i] ? 1 : 0)
            << '\n';
    }
    return out.str();
}

void emit_fits_json(const std::vector<mc::ScenarioSummary>& summaries, const std::string& path) {
    nlohmann::json root = nlohmann::json::array();
    for (const auto& s : summaries) {
        nlohmann::json js;
        js["scenario"] = s.scenario.key();
        js["rows"] = nlohmann::json::array();
        for (const auto& row : s.rows) {
            nlohmann::json jr;
            jr["method"] = imputers::method_name(row.method);
            jr["branch"] = mc::branch_name(row.branch);
            jr["bias"] = row.coef.bias;
            jr["rmse"] = row.coef.rmse;
            jr["coverage"] = row.coef.coverage;
            jr["mse_mean"] = row.mse.mean;
            js["rows"].push_back(std::move(jr));
        }
        root.push_back(std::move(js));
    }
    open_out(path) << root.dump(2) << '\n';
}

void write_manifest(const config::RunConfig& cfg, const std::vector<mc::Scenario>& scenarios,
                    const std::string& path) {
    nlohmann::json j;
    j["software"] = "misim";
    j["version"] = "1.0.0";
    j["master_seed"] = cfg.seed;
    j["timestamp_utc"] = []() {
        char buf[32];
        const std::time_t t = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&t, &tm);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return std::string(buf);
    }();
    j["config"] = config::serialize(cfg);
    j["imputers"] = {{"d_pool", cfg.imputer.d_pool},
                     {"n_trees", cfg.imputer.n_trees},
                     {"min_leaf", cfg.imputer.min_leaf},
                     {"max_depth", cfg.imputer.max_depth},
                     {"support_threshold", cfg.imputer.support_threshold}};
    j["scenarios"] = nlohmann::json::array();
    for (const auto& sc : scenarios) j["scenarios"].push_back(sc.key());
    open_out(path) << j.dump(2) << '\n';
}

BoxStats box_stats(const std::vector<double>& values) {
    BoxStats b;
    b.q1 = pooling::quantile_type7(values, 0.25);
    b.q2 = pooling::quantile_type7(values, 0.5);
    b.q3 = pooling::quantile_type7(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr;
    const double hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_lo = b.q1;
    b.whisker_hi = b.q3;
    bool any_lo = false, any_hi = false;
    for (double v : values) {
        if (v >= lo_fence && (!any_lo || v < b.whisker_lo)) {
            b.whisker_lo = v;
            any_lo = true;
        }
        if (v <= hi_fence && (!any_hi || v > b.whisker_hi)) {
            b.whisker_hi = v;
            any_hi = true;
        }
        if (v < lo_fence || v > hi_fence) b.outliers.push_back(v);
    }
    std::sort(b.outliers.begin(), b.outliers.end());
    return b;
}

DensityCurve density_curve(const std::vector<double>& values) {
    DensityCurve c;
    const std::size_t n = values.size();
    if (n == 0) throw std::invalid_argument("density_curve: empty input");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = (n > 1) ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    const double iqr =
        pooling::quantile_type7(values, 0.75) - pooling::quantile_type7(values, 0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
    c.bandwidth = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    if (c.bandwidth <= 0.0) {
        c.degenerate = true;
        c.x = {mean};
        c.y = {1.0};
        return c;
    }
    const double lo = *std::min_element(values.begin(), values.end()) - 3.0 * c.bandwidth;
    const double hi = *std::max_element(values.begin(), values.end()) + 3.0 * c.bandwidth;
    const int grid = 128;
    c.x.resize(grid);
    c.y.resize(grid);
    const double norm = 1.0 / (static_cast<double>(n) * c.bandwidth * std::sqrt(2.0 * M_PI));
    for (int g = 0; g < grid; ++g) {
        const double x = lo + (hi - lo) * g / (grid - 1);
        double dens = 0.0;
        for (double v : values) {
            const double z = (x - v) / c.bandwidth;
            dens += std::exp(-0.5 * z * z);
        }
        c.x[static_cast<std::size_t>(g)] = x;
        c.y[static_cast<std::size_t>(g)] = dens * norm;
    }
    return c;
}

namespace {

// Minimal SVG canvas with linear axes and tick labels.
class Svg {
public:
    Svg(double xmin, double xmax, double ymin, double ymax, std::string title)
        : xmin_(xmin), xmax_(xmax), ymin_(ymin), ymax_(ymax), title_(std::move(title)) {
        if (xmax_ <= xmin_) xmax_ = xmin_ + 1.0;
        if (ymax_ <= ymin_) ymax_ = ymin_ + 1.0;
    }

    double px(double x) const { return ml_ + (x - xmin_) / (xmax_ - xmin_) * (w_ - ml_ - mr_); }
    double py(double y) const { return h_ - mb_ - (y - ymin_) / (ymax_ - ymin_) * (h_ - mt_ - mb_); }

    void polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                  const std::string& color) {
        body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < xs.size(); ++i)
            body_ << px(xs[i]) << ',' << py(ys[i]) << ' ';
        body_ << "\"/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& color,
              const std::string& dash = "") {
        body_ << "<line x1=\"" << px(x1) << "\" y1=\"" << py(y1) << "\" x2=\"" << px(x2)
              << "\" y2=\"" << py(y2) << "\" stroke=\"" << color << "\"";
        if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << "\"";
        body_ << "/>\n";
    }

    void rect(double x1, double y1, double x2, double y2, const std::string& color) {
        body_ << "<rect x=\"" << px(x1) << "\" y=\"" << py(y2) << "\" width=\""
              << (px(x2) - px(x1)) << "\" height=\"" << (py(y1) - py(y2))
              << "\" fill=\"none\" stroke=\"" << color << "\"/>\n";
    }

    void circle(double x, double y, const std::string& color) {
        body_ << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y)
              << "\" r=\"2\" fill=\"" << color << "\"/>\n";
    }

    void text_at(double xpix, double ypix, const std::string& s, const std::string& color = "#000") {
        body_ << "<text x=\"" << xpix << "\" y=\"" << ypix << "\" font-size=\"11\" fill=\"" << color
              << "\">" << s << "</text>\n";
    }

    void legend(const std::vector<std::string>& labels) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const double y = mt_ + 14.0 * static_cast<double>(i + 1);
            body_ << "<line x1=\"" << (w_ - mr_ + 6) << "\" y1=\"" << y << "\" x2=\""
                  << (w_ - mr_ + 22) << "\" y2=\"" << y << "\" stroke=\"" << kMethodColors[i % 6]
                  << "\" stroke-width=\"2\"/>\n";
            text_at(w_ - mr_ + 26, y + 4, labels[i]);
        }
    }

    void save(const std::string& path) {
        auto out = open_out(path);
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
            << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        // axes
        out << "<line x1=\"" << ml_ << "\" y1=\"" << (h_ - mb_) << "\" x2=\"" << (w_ - mr_)
            << "\" y2=\"" << (h_ - mb_) << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << ml_ << "\" y1=\"" << mt_ << "\" x2=\"" << ml_ << "\" y2=\""
            << (h_ - mb_) << "\" stroke=\"black\"/>\n";
        for (int t = 0; t <= 4; ++t) {
            const double fx = xmin_ + (xmax_ - xmin_) * t / 4.0;
            const double fy = ymin_ + (ymax_ - ymin_) * t / 4.0;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.3g", fx);
            out << "<text x=\"" << px(fx) - 10 << "\" y=\"" << (h_ - mb_ + 16)
                << "\" font-size=\"10\">" << buf << "</text>\n";
            std::snprintf(buf, sizeof(buf), "%.3g", fy);
            out << "<text x=\"" << 4 << "\" y=\"" << py(fy) + 4 << "\" font-size=\"10\">" << buf
                << "</text>\n";
        }
        out << "<text x=\"" << ml_ << "\" y=\"16\" font-size=\"13\">" << title_ << "</text>\n";
        out << body_.str() << "</svg>\n";
    }

private:
    double w_ = 680, h_ = 420;
    double ml_ = 56, mr_ = 90, mt_ = 26, mb_ = 36;
    double xmin_, xmax_, ymin_, ymax_;
    std::string title_;
    std::ostringstream body_;
};

struct MseSeries {
    // [scenario][branch][method] -> replicate cv_mse values
    std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> data;
};

MseSeries read_replicates(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("missing " + path +
                                 " (run simulate with --keep-replicates to enable plots)");
    MseSeries s;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        s.data[f[0]][f[2]][f[3]].push_back(std::stod(f[4]));
    }
    return s;
}

struct QqSeries {
    std::map<std::string, std::map<std::string, std::map<std::string,
        std::pair<std::vector<double>, std::vector<double>>>>> data;
};

QqSeries read_qq(const std::string& path) {
    QqSeries s;
    std::ifstream in(path);
    if (!in) return s;  // QQ panels are skipped when absent
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        auto& curve = s.data[f[0]][f[1]][f[2]];
        curve.first.push_back(std::stod(f[4]));
        curve.second.push_back(std::stod(f[5]));
    }
    return s;
}

std::vector<std::string> method_order(
    const std::map<std::string, std::vector<double>>& by_method) {
    std::vector<std::string> names;
    for (const auto& [name, vals] : by_method) names.push_back(name);
    std::sort(names.begin(), names.end());  // T1..T6
    return names;
}

}  // namespace

void emit_plots(const std::string& in_dir) {
    const MseSeries mse = read_replicates(in_dir + "/replicates.csv");
    const QqSeries qq = read_qq(in_dir + "/qq.csv");

    for (const auto& [scenario, by_branch] : mse.data) {
        for (const auto& [branch, by_method] : by_branch) {
            const auto methods = method_order(by_method);

            // Density overlay.
            double xmin = 1e300, xmax = -1e300, ymax = 0.0;
            std::vector<DensityCurve> curves;
            for (const auto& name : methods) {
                curves.push_back(density_curve(by_method.at(name)));
                const auto& c = curves.back();
                if (!c.degenerate) {
                    xmin = std::min(xmin, c.x.front());
                    xmax = std::max(xmax, c.x.back());
                    ymax = std::max(ymax, *std::max_element(c.y.begin(), c.y.end()));
                } else {
                    xmin = std::min(xmin, c.x[0] - 1.0);
                    xmax = std::max(xmax, c.x[0] + 1.0);
                }
            }
            if (ymax <= 0.0) ymax = 1.0;
            Svg dens(xmin, xmax, 0.0, ymax * 1.05, "CV-MSE density  " + scenario + "  " + branch);
            for (std::size_t i = 0; i < methods.size(); ++i) {
                if (curves[i].degenerate) {
                    dens.line(curves[i].x[0], 0.0, curves[i].x[0], ymax, kMethodColors[i % 6]);
                    dens.text_at(dens.px(curves[i].x[0]) + 3, dens.py(ymax) + 10,
                                 methods[i] + " (spike)", kMethodColors[i % 6]);
                } else {
                    dens.polyline(curves[i].x, curves[i].y, kMethodColors[i % 6]);
                }
            }
            dens.legend(methods);
            dens.save(in_dir + "/density_" + scenario + "_" + branch + ".svg");

            // Side-by-side boxplots.
            double bmin = 1e300, bmax = -1e300;
            std::vector<BoxStats> boxes;
            for (const auto& name : methods) {
                boxes.push_back(box_stats(by_method.at(name)));
                const auto& vals = by_method.at(name);
                bmin = std::min(bmin, *std::min_element(vals.begin(), vals.end()));
                bmax = std::max(bmax, *std::max_element(vals.begin(), vals.end()));
            }
            const double pad = (bmax > bmin) ? 0.05 * (bmax - bmin) : 1.0;
            Svg box(0.0, static_cast<double>(methods.size()), bmin - pad, bmax + pad,
                    "CV-MSE boxplots  " + scenario + "  " + branch);
            for (std::size_t i = 0; i < methods.size(); ++i) {
                const double c = static_cast<double>(i) + 0.5;
                const auto& b = boxes[i];
                const char* col = kMethodColors[i % 6];
                box.rect(c - 0.3, b.q1, c + 0.3, b.q3, col);
                box.line(c - 0.3, b.q2, c + 0.3, b.q2, col);
                box.line(c, b.q3, c, b.whisker_hi, col);
                box.line(c, b.q1, c, b.whisker_lo, col);
                box.line(c - 0.15, b.whisker_hi, c + 0.15, b.whisker_hi, col);
                box.line(c - 0.15, b.whisker_lo, c + 0.15, b.whisker_lo, col);
                for (double o : b.outliers) box.circle(c, o, col);
                box.text_at(box.px(c) - 8, 410, methods[i]);
            }
            box.save(in_dir + "/box_" + scenario + "_" + branch + ".svg");

            // QQ panel with identity reference.
            const auto sit = qq.data.find(scenario);
            if (sit == qq.data.end()) continue;
            const auto bit = sit->second.find(branch);
            if (bit == sit->second.end()) continue;
            double qmin = 1e300, qmax = -1e300;
            for (const auto& [name, curve] : bit->second) {
                for (double v : curve.first) { qmin = std::min(qmin, v); qmax = std::max(qmax, v); }
                for (double v : curve.second) { qmin = std::min(qmin, v); qmax = std::max(qmax, v); }
            }
            Svg qqs(qmin, qmax, qmin, qmax, "QQ predicted vs true y  " + scenario + "  " + branch);
            qqs.line(qmin, qmin, qmax, qmax, "#888888", "4,3");
            std::size_t i = 0;
            std::vector<std::string> qnames;
            for (const auto& [name, curve] : bit->second) {
                qqs.polyline(curve.first, curve.second, kMethodColors[i % 6]);
                qnames.push_back(name);
                ++i;
            }
            qqs.legend(qnames);
            qqs.save(in_dir + "/qq_" + scenario + "_" + branch + ".svg");
        }
    }
}

}  // namespace misim::report
