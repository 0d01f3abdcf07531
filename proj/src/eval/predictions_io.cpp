#include "shdbench/eval/predictions_io.hpp"

#include "shdbench/error.hpp"
#include "shdbench/io_util.hpp"

namespace shdbench::eval {

void write_predictions_csv(const std::string& path, const PredictionSet& pred,
                           const data::TargetSpec& spec) {
    pred.validate();
    CsvTable t;
    t.comments["model_id"] = pred.model_id;
    t.comments["config_hash"] = pred.config_hash;
    t.header.push_back("record_id");
    for (const auto& ep : spec.endpoints) t.header.push_back(ep.name);
    const auto n = static_cast<size_t>(pred.probabilities.rows());
    t.rows.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        std::vector<std::string> row;
        row.reserve(1 + data::kNumTargets);
        row.push_back(pred.record_ids[i]);
        for (int j = 0; j < data::kNumTargets; ++j)
            row.push_back(format_double(pred.probabilities(static_cast<Eigen::Index>(i), j)));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

PredictionSet read_predictions_csv(const std::string& path, const data::TargetSpec& spec) {
    const CsvTable t = read_csv(path);
    const int id_col = t.require_column("record_id");
    std::array<int, data::kNumTargets> cols{};
    for (int j = 0; j < data::kNumTargets; ++j) {
        cols[static_cast<size_t>(j)] = t.column(spec.endpoints[static_cast<size_t>(j)].name);
        require(cols[static_cast<size_t>(j)] >= 0, ErrCat::format,
                "predictions file lacks column '" + spec.endpoints[static_cast<size_t>(j)].name +
                    "': " + path);
    }
    PredictionSet pred;
    if (auto it = t.comments.find("model_id"); it != t.comments.end()) pred.model_id = it->second;
    if (auto it = t.comments.find("config_hash"); it != t.comments.end())
        pred.config_hash = it->second;
    const auto n = t.rows.size();
    require(n > 0, ErrCat::data, "predictions file has no rows: " + path);
    pred.probabilities.resize(static_cast<Eigen::Index>(n), data::kNumTargets);
    pred.record_ids.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const auto& row = t.rows[i];
        pred.record_ids.push_back(row[static_cast<size_t>(id_col)]);
        for (int j = 0; j < data::kNumTargets; ++j)
            pred.probabilities(static_cast<Eigen::Index>(i), j) =
                parse_double(row[static_cast<size_t>(cols[static_cast<size_t>(j)])],
                             "prediction probability");
    }
    pred.validate();
    return pred;
}

}  // namespace shdbench::eval
