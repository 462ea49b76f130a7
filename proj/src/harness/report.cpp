#include "fmaml/harness/report.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fmaml/core/tensor.hpp"

namespace fmaml::harness {

namespace {

constexpr const char* kReportFormat = "fmaml-report-1";
constexpr const char* kMissing = "—";

std::string full_precision(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    // "—" is one column but three bytes.
    std::size_t cols = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++cols;
    return s + std::string(width > cols ? width - cols : 0, ' ');
}

std::optional<double> cell_mean(const ExperimentReport& r, const std::string& variant, std::size_t k) {
    const CellResult* c = r.cell(variant, k);
    if (!c || !c->ok) return std::nullopt;
    return c->mean;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

nlohmann::ordered_json report_to_json(const ExperimentReport& r) {
    nlohmann::ordered_json j;
    j["format"] = kReportFormat;
    j["seed"] = r.seed;
    j["config_hash"] = r.config_hash;
    j["corpus"] = r.corpus;
    j["corpus_fingerprint"] = r.corpus_fingerprint;
    j["profile"] = r.profile;
    j["target_language"] = r.target_language;
    j["source_languages"] = r.source_languages;
    j["notes"] = r.notes;
    j["meta_iters"] = r.meta_iters;
    j["trials"] = r.trials;
    j["eval_per_label"] = r.eval_per_label;
    j["k_shots"] = r.k_shots;
    j["variants"] = r.variants;
    j["target_reads_during_meta_train"] = r.target_reads_during_meta_train;
    auto& results = j["results"] = nlohmann::ordered_json::array();
    for (const auto& c : r.cells) {
        nlohmann::ordered_json e;
        e["variant"] = c.variant;
        e["k_shot"] = c.k_shot;
        e["ok"] = c.ok;
        if (c.ok) {
            e["mean"] = c.mean;
            e["std"] = c.std;
            e["trials"] = c.trials;
        } else {
            e["error"] = c.error;
        }
        results.push_back(std::move(e));
    }
    auto& conv = j["convergence"] = nlohmann::ordered_json::object();
    for (const auto& [variant, by_k] : r.traces)
        for (const auto& [k, trace] : by_k) {
            nlohmann::ordered_json e;
            std::vector<double> loss, acc;
            for (const auto& p : trace) {
                loss.push_back(p.meta_loss);
                acc.push_back(p.query_accuracy);
            }
            e["meta_loss"] = loss;
            e["query_accuracy"] = acc;
            conv[variant][std::to_string(k)] = std::move(e);
        }
    auto& ts = j["timestamps"];
    ts["started"] = r.started;
    ts["finished"] = r.finished;
    auto& wall = ts["cell_wall_seconds"] = nlohmann::ordered_json::object();
    for (const auto& c : r.cells) wall[c.variant + "/k" + std::to_string(c.k_shot)] = c.wall_seconds;
    return j;
}

ExperimentReport report_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kReportFormat)
            throw Error("unsupported report format '" + j.at("format").get<std::string>() + "'");
        ExperimentReport r;
        r.seed = j.at("seed").get<std::uint64_t>();
        r.config_hash = j.at("config_hash").get<std::string>();
        r.corpus = j.at("corpus").get<std::string>();
        r.corpus_fingerprint = j.at("corpus_fingerprint").get<std::string>();
        r.profile = j.at("profile").get<std::string>();
        r.target_language = j.at("target_language").get<std::string>();
        r.source_languages = j.at("source_languages").get<std::vector<std::string>>();
        r.notes = j.at("notes").get<std::vector<std::string>>();
        r.meta_iters = j.at("meta_iters").get<std::size_t>();
        r.trials = j.at("trials").get<std::size_t>();
        r.eval_per_label = j.at("eval_per_label").get<std::size_t>();
        r.k_shots = j.at("k_shots").get<std::vector<std::size_t>>();
        r.variants = j.at("variants").get<std::vector<std::string>>();
        r.target_reads_during_meta_train = j.at("target_reads_during_meta_train").get<std::size_t>();
        const auto& wall = j.contains("timestamps") && j["timestamps"].contains("cell_wall_seconds")
                               ? j["timestamps"]["cell_wall_seconds"]
                               : nlohmann::json::object();
        for (const auto& e : j.at("results")) {
            CellResult c;
            c.variant = e.at("variant").get<std::string>();
            c.k_shot = e.at("k_shot").get<std::size_t>();
            c.ok = e.at("ok").get<bool>();
            if (c.ok) {
                c.mean = e.at("mean").get<double>();
                c.std = e.at("std").get<double>();
                c.trials = e.at("trials").get<std::vector<double>>();
            } else {
                c.error = e.at("error").get<std::string>();
            }
            const std::string key = c.variant + "/k" + std::to_string(c.k_shot);
            if (wall.contains(key)) c.wall_seconds = wall[key].get<double>();
            r.cells.push_back(std::move(c));
        }
        for (const auto& [variant, by_k] : j.at("convergence").items())
            for (const auto& [k, e] : by_k.items()) {
                const auto loss = e.at("meta_loss").get<std::vector<double>>();
                const auto acc = e.at("query_accuracy").get<std::vector<double>>();
                if (loss.size() != acc.size()) throw Error("convergence trace lengths differ");
                auto& trace = r.traces[variant][std::stoul(k)];
                for (std::size_t i = 0; i < loss.size(); ++i) trace.push_back({loss[i], acc[i]});
            }
        if (j.contains("timestamps")) {
            r.started = j["timestamps"].value("started", "");
            r.finished = j["timestamps"].value("finished", "");
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed report: ") + e.what());
    }
}

void write_report(const std::filesystem::path& path, const ExperimentReport& report) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << report_to_json(report).dump(2) << '\n';
}

ExperimentReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    return report_from_json(j);
}

std::string format_percent(const std::optional<double>& value) {
    if (!value) return kMissing;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", *value * 100.0);
    return buf;
}

std::string variant_title(const std::string& variant) {
    if (variant == "supervised") return "Supervised";
    if (variant == "maml") return "MAML";
    if (variant == "fmaml") return "F-MAML";
    return variant;
}

std::string emit_text_table(const ExperimentReport& r) {
    std::ostringstream out;
    out << "Target language: " << r.target_language << "\n";
    out << pad("Method", 12);
    for (const std::size_t k : r.k_shots) out << pad(std::to_string(k) + "-shot", 12);
    out << "\n";
    for (const auto& v : r.variants) {
        out << pad(variant_title(v), 12);
        for (const std::size_t k : r.k_shots) out << pad(format_percent(cell_mean(r, v, k)), 12);
        out << "\n";
    }
    for (const auto& c : r.cells)
        if (!c.ok) out << variant_title(c.variant) << " K=" << c.k_shot << " failed: " << c.error << "\n";
    return out.str();
}

std::string emit_csv_table(const ExperimentReport& r) {
    std::ostringstream out;
    out << "variant";
    for (const std::size_t k : r.k_shots) out << ",K=" << k;
    out << "\n";
    for (const auto& v : r.variants) {
        out << v;
        for (const std::size_t k : r.k_shots) {
            const auto m = cell_mean(r, v, k);
            out << ',' << (m ? full_precision(*m) : kMissing);
        }
        out << "\n";
    }
    return out.str();
}

CsvTable parse_csv_table(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty CSV table");
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "variant") throw Error("CSV table must start with a 'variant' column");
    CsvTable t;
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (header[i].rfind("K=", 0) != 0) throw Error("bad CSV column '" + header[i] + "'");
        t.k_shots.push_back(std::stoul(header[i].substr(2)));
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) throw Error("CSV row '" + line + "' has the wrong number of fields");
        std::vector<std::optional<double>> values;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            if (fields[i] == kMissing) {
                values.emplace_back();
            } else {
                std::size_t used = 0;
                const double v = std::stod(fields[i], &used);
                if (used != fields[i].size()) throw Error("bad CSV value '" + fields[i] + "'");
                values.emplace_back(v);
            }
        }
        t.rows.emplace_back(fields[0], std::move(values));
    }
    return t;
}

std::string emit_language_table(const std::vector<ExperimentReport>& reports, std::size_t k) {
    std::vector<std::string> variants;
    for (const auto& r : reports)
        for (const auto& v : r.variants)
            if (std::find(variants.begin(), variants.end(), v) == variants.end()) variants.push_back(v);
    std::ostringstream out;
    out << k << "-shot accuracy by target language\n";
    out << pad("Method", 12);
    for (const auto& r : reports) out << pad(r.target_language, 12);
    out << "\n";
    for (const auto& v : variants) {
        out << pad(variant_title(v), 12);
        for (const auto& r : reports) out << pad(format_percent(cell_mean(r, v, k)), 12);
        out << "\n";
    }
    return out.str();
}

std::string emit_trace_csv(const std::vector<TracePoint>& trace) {
    std::ostringstream out;
    out << "iter,meta_loss,query_acc\n";
    for (std::size_t i = 0; i < trace.size(); ++i)
        out << i << ',' << full_precision(trace[i].meta_loss) << ',' << full_precision(trace[i].query_accuracy)
            << "\n";
    return out.str();
}

}  // namespace fmaml::harness
