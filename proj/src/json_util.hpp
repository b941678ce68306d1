#pragma once

// Internal: JSON helpers shared by io.cpp and experiment.cpp.

#include <json.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "couplex/error.hpp"
#include "couplex/model.hpp"

namespace couplex::detail {

using json = nlohmann::json;

/// Read-only view of an object that names the full field path in errors.
class Node {
public:
    Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

    const json& raw() const { return *j_; }
    const std::string& path() const { return path_; }
    bool has(const char* key) const { return j_->is_object() && j_->contains(key) && !(*j_)[key].is_null(); }

    Node child(const char* key) const {
        if (!has(key)) fail(ErrorCode::config, where(key) + ": required field missing");
        return Node((*j_)[key], where(key));
    }
    std::optional<Node> optional(const char* key) const {
        if (!has(key)) return std::nullopt;
        return Node((*j_)[key], where(key));
    }

    double number() const {
        if (!j_->is_number()) fail(ErrorCode::config, path_ + ": expected a number");
        return j_->get<double>();
    }
    std::size_t count() const {
        if (!j_->is_number_integer() || j_->get<long long>() < 0)
            fail(ErrorCode::config, path_ + ": expected a non-negative integer");
        return j_->get<std::size_t>();
    }
    std::string text() const {
        if (!j_->is_string()) fail(ErrorCode::config, path_ + ": expected a string");
        return j_->get<std::string>();
    }
    bool boolean() const {
        if (!j_->is_boolean()) fail(ErrorCode::config, path_ + ": expected true or false");
        return j_->get<bool>();
    }
    Vec vec() const {
        if (!j_->is_array()) fail(ErrorCode::config, path_ + ": expected an array of numbers");
        Vec v(static_cast<Eigen::Index>(j_->size()));
        for (std::size_t i = 0; i < j_->size(); ++i) v[static_cast<Eigen::Index>(i)] = item(i).number();
        return v;
    }
    Mat mat() const {
        if (!j_->is_array() || j_->empty()) fail(ErrorCode::config, path_ + ": expected a matrix (array of rows)");
        const std::size_t rows = j_->size();
        const std::size_t cols = item(0).raw().is_array() ? item(0).raw().size() : 0;
        Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows; ++i) {
            const Vec r = item(i).vec();
            if (static_cast<std::size_t>(r.size()) != cols) fail(ErrorCode::config, item(i).path() + ": ragged matrix");
            m.row(static_cast<Eigen::Index>(i)) = r.transpose();
        }
        return m;
    }
    std::size_t size() const {
        if (!j_->is_array()) fail(ErrorCode::config, path_ + ": expected an array");
        return j_->size();
    }
    Node item(std::size_t i) const { return Node((*j_)[i], path_ + "[" + std::to_string(i) + "]"); }

    double number(const char* key, double fallback) const { return has(key) ? child(key).number() : fallback; }
    std::size_t count(const char* key, std::size_t fallback) const { return has(key) ? child(key).count() : fallback; }
    bool boolean(const char* key, bool fallback) const { return has(key) ? child(key).boolean() : fallback; }

    /// Rejects keys outside `allowed` so typos do not pass silently.
    void only(std::initializer_list<const char*> allowed) const {
        if (!j_->is_object()) fail(ErrorCode::config, (path_.empty() ? std::string("config") : path_) + ": expected an object");
        for (const auto& [k, v] : j_->items()) {
            bool ok = false;
            for (const char* a : allowed) ok = ok || k == a;
            if (!ok) fail(ErrorCode::config, where(k.c_str()) + ": unknown field");
        }
    }

private:
    std::string where(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }

    const json* j_;
    std::string path_;
};

/// Non-finite values become the strings "inf", "-inf" and "nan".
inline json num(double x) {
    if (std::isfinite(x)) return x;
    return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

json to_json(const Vec& v);
json to_json(const Mat& m);

ProblemSpec parse_spec(const Node& node);
TerminalSpec parse_terminal(const Node& node);
json terminal_json(const TerminalSpec& t);
json spec_json(const ProblemSpec& spec);
json constants_json(const DerivedConstants& c);
json hypothesis_json(const HypothesisConstants& h);
ConstantConfig parse_constant_config(const Node& node);

}  // namespace couplex::detail
