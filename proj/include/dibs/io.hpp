#pragma once

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dibs/bn_models.hpp"
#include "dibs/graph.hpp"
#include "dibs/latent.hpp"
#include "dibs/metrics.hpp"

namespace dibs {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Graphs: hard graphs as an edge list, soft matrices as row-major arrays.

inline json graph_to_json(const Mat& g) {
    const int d = static_cast<int>(g.rows());
    json edges = json::array();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j && g(i, j) != 0.0) edges.push_back({i, j});
    return json{{"d", d}, {"edges", edges}};
}

inline Mat graph_from_json(const json& j) {
    const int d = j.at("d").get<int>();
    Mat g = Mat::Zero(d, d);
    for (const auto& e : j.at("edges")) g(e.at(0).get<int>(), e.at(1).get<int>()) = 1.0;
    return g;
}

inline json matrix_to_json(const Mat& m) {
    json flat = json::array();
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline Mat matrix_from_json(const json& j) {
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    Mat m(rows, cols);
    const auto& data = j.at("data");
    for (int i = 0; i < rows; ++i)
        for (int c = 0; c < cols; ++c) m(i, c) = data.at(i * cols + c).get<double>();
    return m;
}

inline json vector_to_json(const Vec& v) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline Vec vector_from_json(const json& j) {
    Vec v(static_cast<int>(j.size()));
    for (int i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
    return v;
}

// ---------------------------------------------------------------------------
// Latent embeddings

inline json latent_to_json(const Latent& z) {
    json j;
    j["kind"] = z.kind == LatentKind::Bilinear ? "bilinear" : "scalar";
    j["k"] = z.k();
    j["d"] = z.d();
    j["u"] = matrix_to_json(z.u);
    if (z.kind == LatentKind::Bilinear) j["v"] = matrix_to_json(z.v);
    return j;
}

inline Latent latent_from_json(const json& j) {
    Latent z;
    z.kind = j.at("kind").get<std::string>() == "scalar" ? LatentKind::Scalar : LatentKind::Bilinear;
    z.u = matrix_from_json(j.at("u"));
    if (z.kind == LatentKind::Bilinear) z.v = matrix_from_json(j.at("v"));
    return z;
}

// ---------------------------------------------------------------------------
// Datasets: CSV with a header row of node names, one row per observation.

inline std::string dataset_to_csv(const Mat& x) {
    std::ostringstream out;
    const int d = static_cast<int>(x.cols());
    for (int j = 0; j < d; ++j) out << (j ? "," : "") << "x" << j;
    out << "\n";
    char buf[40];
    for (int i = 0; i < x.rows(); ++i) {
        for (int j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", x(i, j));
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
    return out.str();
}

inline Mat dataset_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset_from_csv: empty file");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("dataset_from_csv: ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("dataset_from_csv: no observations");
    Mat x(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) x(i, j) = rows[i][j];
    return x;
}

// ---------------------------------------------------------------------------
// Parameters

inline json lingauss_params_to_json(const LinGaussParams& p) {
    return json{{"type", "linear"}, {"sigma_sq", p.sigma_sq}, {"theta", matrix_to_json(p.theta)}};
}

inline json ffn_params_to_json(const FfnParams& p, const FfnArch& arch) {
    return json{{"type", "ffn"},
                {"sigma_sq", p.sigma_sq},
                {"d", arch.d},
                {"dims", arch.dims},
                {"flat", vector_to_json(flatten(p))}};
}

// ---------------------------------------------------------------------------
// Posteriors: one shared format for DiBS and MCMC outputs so that evaluation
// is backend-agnostic.

inline json posterior_to_json(const WeightedPosterior& post) {
    post.validate();
    json samples = json::array();
    for (int i = 0; i < post.size(); ++i) {
        json s;
        s["graph"] = graph_to_json(post.graphs[i]);
        if (post.joint()) s["theta"] = vector_to_json(post.params[i]);
        samples.push_back(std::move(s));
    }
    return json{{"d", post.graphs.front().rows()},
                {"mode", post.joint() ? "joint" : "marginal"},
                {"samples", samples},
                {"weights", vector_to_json(post.weights)}};
}

inline WeightedPosterior posterior_from_json(const json& j) {
    WeightedPosterior post;
    const bool joint = j.at("mode").get<std::string>() == "joint";
    for (const auto& s : j.at("samples")) {
        post.graphs.push_back(graph_from_json(s.at("graph")));
        if (joint) post.params.push_back(vector_from_json(s.at("theta")));
    }
    post.weights = vector_from_json(j.at("weights"));
    post.validate();
    return post;
}

// ---------------------------------------------------------------------------
// Files

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json read_json_file(const std::string& path) { return json::parse(read_text_file(path)); }

inline void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace dibs
