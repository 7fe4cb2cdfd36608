// Replay logs: one JSON record per telemetry tick,
//   {"t": s, "frame": <telemetry body>, "commands": [...], "replies": [...]},
// written as JSON lines. The run digest is FNV-1a over the exact bytes.
#pragma once

#include "ursula/comms/json_reader.hpp"
#include "ursula/sim/loop.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ursula::sim {

struct ReplayLog {
    std::vector<Json> records;
    std::uint64_t digest = Fnv1a{}.value();
};

/// Parse JSON lines; blank lines are skipped. Throws Error(Schema) naming the line.
inline ReplayLog parse_log(std::istream& in) {
    ReplayLog log;
    Fnv1a h;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        h.add(line);
        h.add("\n");
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("t") || !j.contains("frame")) {
            throw Error(ErrorCode::Schema, "log line " + std::to_string(n) + ": not a replay record");
        }
        log.records.push_back(std::move(j));
    }
    log.digest = h.value();
    return log;
}

inline ReplayLog load_log(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot open log " + path);
    return parse_log(f);
}

namespace detail {

inline void leaf_paths(const Json& j, const std::string& prefix, std::vector<std::string>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) leaf_paths(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) leaf_paths(j[i], prefix + "." + std::to_string(i), out);
    } else {
        out.push_back(prefix);
    }
}

/// Resolve a dotted path; numeric segments index arrays.
inline const Json* resolve(const Json& root, const std::string& path) {
    const Json* cur = &root;
    std::stringstream ss(path);
    std::string seg;
    while (std::getline(ss, seg, '.')) {
        if (cur->is_object()) {
            const auto it = cur->find(seg);
            if (it == cur->end()) return nullptr;
            cur = &*it;
        } else if (cur->is_array()) {
            if (seg.empty() || seg.find_first_not_of("0123456789") != std::string::npos) return nullptr;
            const auto i = std::stoull(seg);
            if (i >= cur->size()) return nullptr;
            cur = &(*cur)[i];
        } else {
            return nullptr;
        }
    }
    return cur;
}

/// Record-level path first, then relative to the frame.
inline const Json* field(const Json& record, const std::string& path) {
    if (const Json* j = resolve(record, path)) return j;
    if (const auto it = record.find("frame"); it != record.end()) return resolve(*it, path);
    return nullptr;
}

} // namespace detail

/// Leaf fields available in a record, in frame-relative form.
inline std::vector<std::string> available_fields(const Json& record) {
    std::vector<std::string> out{"t"};
    if (const auto it = record.find("frame"); it != record.end()) detail::leaf_paths(*it, "", out);
    return out;
}

/// CSV with one column per requested field and one row per record. Unknown
/// or non-leaf fields throw Error(InvalidArgument) listing the available ones.
inline std::string query_csv(const ReplayLog& log, const std::vector<std::string>& fields) {
    if (fields.empty()) throw Error(ErrorCode::InvalidArgument, "query: no fields requested");
    std::string csv;
    for (std::size_t i = 0; i < fields.size(); ++i) csv += (i ? "," : "") + fields[i];
    csv += "\n";
    if (!log.records.empty()) {
        for (const auto& f : fields) {
            const Json* j = detail::field(log.records.front(), f);
            if (!j || j->is_structured()) {
                std::string avail;
                for (const auto& a : available_fields(log.records.front())) avail += "\n  " + a;
                throw Error(ErrorCode::InvalidArgument,
                            "query: unknown field '" + f + "'" + (j ? " (not a leaf)" : "") + "; available:" + avail);
            }
        }
    }
    for (const auto& rec : log.records) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) csv += ",";
            const Json* j = detail::field(rec, fields[i]);
            if (!j || j->is_null()) continue;
            csv += j->is_string() ? j->get<std::string>() : j->dump();
        }
        csv += "\n";
    }
    return csv;
}

/// Split "a,b, c" into trimmed field names.
inline std::vector<std::string> split_fields(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream ss(list);
    std::string f;
    while (std::getline(ss, f, ',')) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(f.substr(b, e - b + 1));
    }
    return out;
}

} // namespace ursula::sim
