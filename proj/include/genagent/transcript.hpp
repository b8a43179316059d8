#pragma once

// JSONL transcript persistence. Every raw agent reply is appended as one
// line with full provenance; the same schema backs the replay store.

#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace genagent::transcript {

struct Record {
    std::string variant_id;
    double p_t = 0;
    double p_prev = 0;
    double p_fund = 0;
    int replication_index = 0;
    std::string raw_text;
    std::string model_name;
    double temperature = 1.0;
    std::string timestamp;  // ISO 8601 UTC
    std::string parse_status;  // empty in bare replay fixtures
    std::optional<double> w_fund;
    std::optional<double> w_trend;
    std::optional<double> e_fund;
    std::optional<double> e_trend;
};

std::string to_json_line(const Record& r);
std::optional<Record> from_json_line(const std::string& line);

// Reads every parseable record; unparseable lines are reported in warnings.
std::vector<Record> read_jsonl(const std::string& path, std::vector<std::string>* warnings);

std::string utc_timestamp();

// Append-only sink; appends are serialized and flushed per record.
class Store {
  public:
    explicit Store(std::string path) : path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    void append(const Record& r);
    std::vector<Record> read_all(std::vector<std::string>* warnings = nullptr) const;

  private:
    std::string path_;
    std::mutex mutex_;
};

}  // namespace genagent::transcript
