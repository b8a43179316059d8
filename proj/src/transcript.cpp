#include "genagent/transcript.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace genagent::transcript {

using nlohmann::json;

std::string to_json_line(const Record& r) {
    json j;
    j["variant_id"] = r.variant_id;
    j["p_t"] = r.p_t;
    j["p_prev"] = r.p_prev;
    j["p_fund"] = r.p_fund;
    j["replication_index"] = r.replication_index;
    j["raw_text"] = r.raw_text;
    j["model_name"] = r.model_name;
    j["temperature"] = r.temperature;
    j["timestamp"] = r.timestamp;
    if (!r.parse_status.empty()) j["parse_status"] = r.parse_status;
    if (r.w_fund) j["w_fund"] = *r.w_fund;
    if (r.w_trend) j["w_trend"] = *r.w_trend;
    if (r.e_fund) j["e_fund"] = *r.e_fund;
    if (r.e_trend) j["e_trend"] = *r.e_trend;
    return j.dump();
}

std::optional<Record> from_json_line(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    try {
        Record r;
        r.variant_id = j.at("variant_id").get<std::string>();
        r.p_t = j.at("p_t").get<double>();
        r.p_prev = j.at("p_prev").get<double>();
        r.p_fund = j.at("p_fund").get<double>();
        r.replication_index = j.at("replication_index").get<int>();
        r.raw_text = j.at("raw_text").get<std::string>();
        r.model_name = j.value("model_name", std::string{});
        r.temperature = j.value("temperature", 1.0);
        r.timestamp = j.value("timestamp", std::string{});
        r.parse_status = j.value("parse_status", std::string{});
        if (j.contains("w_fund")) r.w_fund = j["w_fund"].get<double>();
        if (j.contains("w_trend")) r.w_trend = j["w_trend"].get<double>();
        if (j.contains("e_fund")) r.e_fund = j["e_fund"].get<double>();
        if (j.contains("e_trend")) r.e_trend = j["e_trend"].get<double>();
        return r;
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

std::vector<Record> read_jsonl(const std::string& path, std::vector<std::string>* warnings) {
    std::vector<Record> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (auto r = from_json_line(line)) {
            out.push_back(std::move(*r));
        } else if (warnings) {
            warnings->push_back(path + ":" + std::to_string(lineno) + ": unparseable record");
        }
    }
    return out;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void Store::append(const Record& r) {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw std::runtime_error("SINK_FAILED: cannot open " + path_);
    out << to_json_line(r) << '\n';
    if (!out) throw std::runtime_error("SINK_FAILED: write error on " + path_);
}

std::vector<Record> Store::read_all(std::vector<std::string>* warnings) const {
    return read_jsonl(path_, warnings);
}

}  // namespace genagent::transcript
