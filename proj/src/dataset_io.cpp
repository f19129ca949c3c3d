#include "url/dataset_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "url/errors.hpp"

namespace url {

namespace {

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

void append_matrix(std::string& out, const Tensor& t) {
    out += '[';
    for (std::int64_t i = 0; i < t.dim(0); ++i) {
        if (i) out += ',';
        out += '[';
        for (std::int64_t j = 0; j < t.dim(1); ++j) {
            if (j) out += ',';
            append_double(out, t.at(i, j));
        }
        out += ']';
    }
    out += ']';
}

void append_coords(std::string& out, const std::vector<Point2>& coords) {
    out += '[';
    for (std::size_t i = 0; i < coords.size(); ++i) {
        if (i) out += ',';
        out += '[';
        append_double(out, coords[i][0]);
        out += ',';
        append_double(out, coords[i][1]);
        out += ']';
    }
    out += ']';
}

std::string meta_line(const Dataset& ds) {
    const SynthConfig& c = ds.config;
    std::string out = "{\"type\":\"meta\",\"config\":{";
    out += "\"n_univ\":" + std::to_string(c.n_univ);
    out += ",\"p_vis\":";
    append_double(out, c.p_vis);
    out += ",\"sigma_feat\":";
    append_double(out, c.sigma_feat);
    out += ",\"sigma_coo\":";
    append_double(out, c.sigma_coo);
    out += ",\"feat_dim\":" + std::to_string(c.feat_dim);
    out += ",\"canvas\":";
    append_double(out, c.canvas);
    out += ",\"n_train\":" + std::to_string(c.n_train);
    out += ",\"n_test\":" + std::to_string(c.n_test);
    out += ",\"rot_max_deg\":";
    append_double(out, c.rot_max_deg);
    out += ",\"scale_min\":";
    append_double(out, c.scale_min);
    out += ",\"scale_max\":";
    append_double(out, c.scale_max);
    out += ",\"trans_max\":";
    append_double(out, c.trans_max);
    out += ",\"seed\":" + std::to_string(c.seed);
    out += "},\"anchor\":{\"coords\":";
    append_coords(out, ds.anchor.coords);
    out += ",\"features\":";
    append_matrix(out, ds.anchor.features);
    out += "}}";
    return out;
}

std::string graph_line(const Graph& g, int id, const char* split) {
    std::string out = "{\"type\":\"graph\",\"id\":" + std::to_string(id);
    out += ",\"split\":\"";
    out += split;
    out += "\",\"labels\":[";
    for (std::size_t i = 0; i < g.labels->size(); ++i) {
        if (i) out += ',';
        out += std::to_string((*g.labels)[i]);
    }
    out += "],\"coords\":";
    append_coords(out, g.coords);
    out += ",\"features\":";
    append_matrix(out, g.features);
    out += '}';
    return out;
}

}  // namespace

Dataset generate_dataset(const SynthConfig& config) {
    config.validate();
    Dataset ds;
    ds.config = config;
    ds.anchor = generate_anchor(config, config.seed);
    for (int i = 0; i < config.n_train; ++i)
        ds.train.push_back(
            sample_graph(ds.anchor, config, config.seed, static_cast<std::uint64_t>(i)));
    for (int i = 0; i < config.n_test; ++i)
        ds.test.push_back(sample_graph(ds.anchor, config, config.seed,
                                       static_cast<std::uint64_t>(config.n_train + i)));
    return ds;
}

void write_dataset(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("dataset: cannot open '" + path + "' for writing");
    out << meta_line(dataset) << '\n';
    int id = 0;
    for (const Graph& g : dataset.train) out << graph_line(g, id++, "train") << '\n';
    for (const Graph& g : dataset.test) out << graph_line(g, id++, "test") << '\n';
    if (!out) throw IoError("dataset: write to '" + path + "' failed");
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("dataset: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw IoError("dataset: empty file '" + path + "'");

    Dataset ds;
    try {
        const auto meta = nlohmann::json::parse(line);
        if (meta.at("type") != "meta") throw IoError("dataset: first record must be meta");
        const auto& cfg = meta.at("config");
        SynthConfig& c = ds.config;
        c.n_univ = cfg.at("n_univ").get<int>();
        c.p_vis = cfg.at("p_vis").get<double>();
        c.sigma_feat = cfg.at("sigma_feat").get<double>();
        c.sigma_coo = cfg.at("sigma_coo").get<double>();
        c.feat_dim = cfg.at("feat_dim").get<int>();
        c.canvas = cfg.at("canvas").get<double>();
        c.n_train = cfg.at("n_train").get<int>();
        c.n_test = cfg.at("n_test").get<int>();
        c.rot_max_deg = cfg.at("rot_max_deg").get<double>();
        c.scale_min = cfg.at("scale_min").get<double>();
        c.scale_max = cfg.at("scale_max").get<double>();
        c.trans_max = cfg.at("trans_max").get<double>();
        c.seed = cfg.at("seed").get<std::uint64_t>();
        c.validate();

        const auto& anchor = meta.at("anchor");
        const auto& acoords = anchor.at("coords");
        for (const auto& p : acoords)
            ds.anchor.coords.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        const auto& afeat = anchor.at("features");
        ds.anchor.features = Tensor({static_cast<std::int64_t>(afeat.size()),
                                     static_cast<std::int64_t>(afeat.at(0).size())});
        for (std::size_t i = 0; i < afeat.size(); ++i)
            for (std::size_t j = 0; j < afeat.at(i).size(); ++j)
                ds.anchor.features.at(static_cast<std::int64_t>(i),
                                      static_cast<std::int64_t>(j)) = afeat[i][j].get<double>();

        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto rec = nlohmann::json::parse(line);
            if (rec.at("type") != "graph") throw IoError("dataset: unexpected record type");
            std::vector<int> labels = rec.at("labels").get<std::vector<int>>();
            std::vector<Point2> coords;
            for (const auto& p : rec.at("coords"))
                coords.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            const auto& feat = rec.at("features");
            Tensor features({static_cast<std::int64_t>(feat.size()),
                             static_cast<std::int64_t>(feat.at(0).size())});
            for (std::size_t i = 0; i < feat.size(); ++i)
                for (std::size_t j = 0; j < feat.at(i).size(); ++j)
                    features.at(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j)) =
                        feat[i][j].get<double>();
            Graph g = make_graph(std::move(coords), std::move(features), std::move(labels));
            const std::string split = rec.at("split").get<std::string>();
            if (split == "train")
                ds.train.push_back(std::move(g));
            else if (split == "test")
                ds.test.push_back(std::move(g));
            else
                throw IoError("dataset: unknown split tag '" + split + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("dataset: malformed record in '" + path + "': " + e.what());
    }
    if (static_cast<int>(ds.train.size()) != ds.config.n_train ||
        static_cast<int>(ds.test.size()) != ds.config.n_test)
        throw IoError("dataset: record count does not match the configuration");
    return ds;
}

}  // namespace url
