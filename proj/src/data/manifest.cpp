#include "shdbench/data/manifest.hpp"

#include "shdbench/io_util.hpp"

namespace shdbench::data {

namespace {

const std::vector<std::string> kBaseHeader = {
    "record_id", "patient_id", "split",
    "sex", "ventricular_rate", "atrial_rate", "pr_interval", "qrs_duration", "qtc", "age",
    "y_lvef", "y_lvwt", "y_as", "y_mr", "y_tr", "y_rv"};

const std::vector<std::string> kMeasurementHeader = {
    "lvef", "ivs", "lvpw", "as_grade", "mr_grade", "tr_grade", "rv_grade"};

std::optional<double> opt_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_double(s);
}

std::optional<Grade> opt_grade(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return grade_from_string(s);
}

}  // namespace

CohortManifest read_manifest(const std::string& path) {
    const CsvTable t = read_csv(path);
    CohortManifest m;

    for (const auto& col : kBaseHeader) t.require_column(col);
    const bool has_measurements = t.column("lvef") >= 0;
    if (has_measurements)
        for (const auto& col : kMeasurementHeader) t.require_column(col);

    if (auto it = t.comments.find("store_checksum"); it != t.comments.end())
        m.store_checksum = static_cast<uint32_t>(parse_int(it->second));

    const int c_id = t.column("record_id"), c_pid = t.column("patient_id"), c_split = t.column("split");
    std::array<int, 7> c_cov{};
    for (int i = 0; i < 7; ++i) c_cov[i] = t.column(kCovariateNames[i]);
    std::array<int, kNumTargets> c_lab{};
    for (int i = 0; i < kNumTargets; ++i) c_lab[i] = t.column(kLabelColumns[i]);

    m.rows.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        require(row.size() >= kBaseHeader.size(), ErrCat::format, "'" + path + "': short row");
        ManifestRow r;
        r.record_id = row[c_id];
        r.patient_id = row[c_pid];
        r.split = split_from_string(row[c_split]);
        for (int i = 0; i < 7; ++i) r.covariates[i] = parse_double(row[c_cov[i]]);
        for (int i = 0; i < kNumTargets; ++i) {
            const int64_t v = parse_int(row[c_lab[i]]);
            require(v == 0 || v == 1, ErrCat::format, "'" + path + "': label must be 0/1");
            r.labels.bits[i] = static_cast<uint8_t>(v);
        }
        if (has_measurements) {
            EchoMeasurements e;
            e.lvef = opt_double(row[t.column("lvef")]);
            e.ivs = opt_double(row[t.column("ivs")]);
            e.lvpw = opt_double(row[t.column("lvpw")]);
            e.as_grade = opt_grade(row[t.column("as_grade")]);
            e.mr_grade = opt_grade(row[t.column("mr_grade")]);
            e.tr_grade = opt_grade(row[t.column("tr_grade")]);
            e.rv_grade = opt_grade(row[t.column("rv_grade")]);
            r.measurements = e;
        }
        m.rows.push_back(std::move(r));
    }
    return m;
}

void write_manifest(const std::string& path, const CohortManifest& manifest) {
    CsvTable t;
    const bool has_measurements =
        !manifest.rows.empty() && manifest.rows.front().measurements.has_value();
    t.header = kBaseHeader;
    if (has_measurements)
        t.header.insert(t.header.end(), kMeasurementHeader.begin(), kMeasurementHeader.end());
    if (manifest.store_checksum)
        t.comments["store_checksum"] = std::to_string(*manifest.store_checksum);

    for (const auto& r : manifest.rows) {
        std::vector<std::string> row;
        row.reserve(t.header.size());
        row.push_back(r.record_id);
        row.push_back(r.patient_id);
        row.push_back(to_string(r.split));
        for (double c : r.covariates) row.push_back(format_double(c));
        for (int i = 0; i < kNumTargets; ++i) row.push_back(std::to_string(int(r.labels.bits[i])));
        if (has_measurements) {
            const auto& e = r.measurements.value_or(EchoMeasurements{});
            auto put_d = [&](const std::optional<double>& v) { row.push_back(v ? format_double(*v) : ""); };
            auto put_g = [&](const std::optional<Grade>& g) { row.push_back(g ? to_string(*g) : ""); };
            put_d(e.lvef);
            put_d(e.ivs);
            put_d(e.lvpw);
            put_g(e.as_grade);
            put_g(e.mr_grade);
            put_g(e.tr_grade);
            put_g(e.rv_grade);
        }
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

}  // namespace shdbench::data
