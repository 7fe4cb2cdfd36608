// Strict, path-reporting reader over parsed JSON. Every problem is recorded
// as an Issue with the dotted path of the offending field; unknown object
// keys are problems too.
#pragma once

#include "ursula/core.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ursula::comms {

using Json = nlohmann::json;

struct Issue {
    std::string path;
    std::string message;

    bool operator==(const Issue&) const = default;
};

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

/// Error carrying the first issue's path.
class SchemaError : public Error {
  public:
    SchemaError(ErrorCode code, Issue issue)
        : Error(code, (issue.path.empty() ? std::string("<root>") : issue.path) + ": " + issue.message),
          issue_(std::move(issue)) {}

    const std::string& path() const noexcept { return issue_.path; }
    const Issue& issue() const noexcept { return issue_; }

  private:
    Issue issue_;
};

/// Nesting depth of a JSON text, counting brackets outside string literals.
/// Used to refuse pathological inputs before handing them to the parser.
inline std::size_t nesting_depth(std::string_view text) {
    std::size_t depth = 0, max_depth = 0;
    bool in_string = false, escaped = false;
    for (char c : text) {
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '[' || c == '{') max_depth = std::max(max_depth, ++depth);
        else if ((c == ']' || c == '}') && depth > 0) --depth;
    }
    return max_depth;
}

inline constexpr std::size_t kMaxMessageBytes = 1 << 20;
inline constexpr std::size_t kMaxDepth = 32;

/// Parse text into JSON without throwing. Failures are reported at the root.
inline std::optional<Json> parse_json(std::string_view text, std::vector<Issue>& issues) {
    if (text.size() > kMaxMessageBytes) {
        issues.push_back({"", "message exceeds " + std::to_string(kMaxMessageBytes) + " bytes"});
        return std::nullopt;
    }
    if (nesting_depth(text) > kMaxDepth) {
        issues.push_back({"", "nesting deeper than " + std::to_string(kMaxDepth)});
        return std::nullopt;
    }
    Json j = Json::parse(text.begin(), text.end(), nullptr, false);
    if (j.is_discarded()) {
        issues.push_back({"", "malformed JSON"});
        return std::nullopt;
    }
    return j;
}

class Node {
  public:
    Node(const Json& j, std::string path, std::vector<Issue>& issues)
        : j_(&j), path_(std::move(path)), issues_(&issues) {}

    const Json& json() const { return *j_; }
    const std::string& path() const { return path_; }
    std::vector<Issue>& issues() const { return *issues_; }
    void fail(const std::string& message) const { issues_->push_back({path_, message}); }
    bool is_null() const { return j_->is_null(); }

    bool read(double& out) const {
        if (!j_->is_number()) return fail("expected number"), false;
        const double v = j_->get<double>();
        if (!std::isfinite(v)) return fail("number out of range"), false;
        out = v;
        return true;
    }
    bool read(std::uint64_t& out) const {
        if (j_->is_number_unsigned()) {
            out = j_->get<std::uint64_t>();
            return true;
        }
        if (j_->is_number_integer() && j_->get<std::int64_t>() >= 0) {
            out = static_cast<std::uint64_t>(j_->get<std::int64_t>());
            return true;
        }
        return fail("expected nonnegative integer"), false;
    }
    bool read(int& out) const {
        std::uint64_t v = 0;
        if (!read(v)) return false;
        if (v > 1000000) return fail("integer out of range"), false;
        out = static_cast<int>(v);
        return true;
    }
    bool read(bool& out) const {
        if (!j_->is_boolean()) return fail("expected boolean"), false;
        out = j_->get<bool>();
        return true;
    }
    bool read(std::string& out) const {
        if (!j_->is_string()) return fail("expected string"), false;
        out = j_->get<std::string>();
        return true;
    }
    bool read(Vec3& out) const {
        if (!j_->is_array() || j_->size() != 3) return fail("expected array of 3 numbers"), false;
        bool ok = true;
        for (std::size_t i = 0; i < 3; ++i) ok = at(i).read(out[static_cast<Eigen::Index>(i)]) && ok;
        return ok;
    }
    template <std::size_t N>
    bool read(std::array<double, N>& out) const {
        if (!j_->is_array() || j_->size() != N) {
            return fail("expected array of " + std::to_string(N) + " numbers"), false;
        }
        bool ok = true;
        for (std::size_t i = 0; i < N; ++i) ok = at(i).read(out[i]) && ok;
        return ok;
    }
    /// Nullable number: null maps to nullopt.
    bool read(std::optional<double>& out) const {
        if (j_->is_null()) {
            out.reset();
            return true;
        }
        double v = 0.0;
        if (!read(v)) return false;
        out = v;
        return true;
    }
    bool read(std::optional<std::uint64_t>& out) const {
        if (j_->is_null()) {
            out.reset();
            return true;
        }
        std::uint64_t v = 0;
        if (!read(v)) return false;
        out = v;
        return true;
    }

    /// Enumerations parsed from their string form.
    template <class T, class F>
    bool read_enum(T& out, F&& from_string) const {
        std::string s;
        if (!read(s)) return false;
        const auto v = from_string(s);
        if (!v) return fail("unknown value \"" + s + "\""), false;
        out = *v;
        return true;
    }

    template <class T, class F>
    bool read_array(std::vector<T>& out, F&& each) const {
        if (!j_->is_array()) return fail("expected array"), false;
        out.assign(j_->size(), T{});
        bool ok = true;
        for (std::size_t i = 0; i < j_->size(); ++i) ok = each(at(i), out[i]) && ok;
        return ok;
    }

    Node at(std::size_t i) const { return Node((*j_)[i], path_ + "[" + std::to_string(i) + "]", *issues_); }

  private:
    const Json* j_;
    std::string path_;
    std::vector<Issue>* issues_;
};

/// Object view that tracks which keys were consumed. `close()` reports the
/// rest as unknown fields.
class Object {
  public:
    explicit Object(const Node& n) : node_(n) {
        valid_ = n.json().is_object();
        if (!valid_) n.fail("expected object");
    }

    bool valid() const { return valid_; }
    const Node& node() const { return node_; }

    std::optional<Node> child(const std::string& key) {
        if (!valid_) return std::nullopt;
        seen_.insert(key);
        const auto it = node_.json().find(key);
        if (it == node_.json().end()) return std::nullopt;
        return Node(*it, join_path(node_.path(), key), node_.issues());
    }

    /// Required field: missing keys are reported.
    template <class F>
    bool req(const std::string& key, F&& f) {
        if (!valid_) return false;
        auto c = child(key);
        if (!c) {
            node_.issues().push_back({join_path(node_.path(), key), "missing required field"});
            return false;
        }
        return f(*c);
    }
    template <class T>
    bool req_value(const std::string& key, T& out) {
        return req(key, [&](const Node& c) { return c.read(out); });
    }

    /// Optional field: absence leaves the default in place.
    template <class F>
    bool opt(const std::string& key, F&& f) {
        auto c = child(key);
        if (!c) return true;
        return f(*c);
    }
    template <class T>
    bool opt_value(const std::string& key, T& out) {
        return opt(key, [&](const Node& c) { return c.read(out); });
    }

    bool close() {
        if (!valid_) return false;
        bool ok = true;
        for (const auto& [k, v] : node_.json().items()) {
            if (!seen_.count(k)) {
                node_.issues().push_back({join_path(node_.path(), k), "unknown field"});
                ok = false;
            }
        }
        return ok;
    }

  private:
    Node node_;
    bool valid_ = false;
    std::set<std::string> seen_;
};

/// Serialize a Vec3 as a 3-element array.
inline Json to_json_array(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

template <std::size_t N>
inline Json to_json_array(const std::array<double, N>& a) {
    Json j = Json::array();
    for (double v : a) j.push_back(v);
    return j;
}

inline Json nullable(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

} // namespace ursula::comms
