#include "nvscope/report_json.hpp"

#include <cmath>

#include <json.hpp>

namespace nvscope {

namespace {

using nlohmann::ordered_json;

ordered_json num(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json model_json(const analysis::DoubleLorentzianModel& m) {
    return {{"b0", num(m.b0)}, {"a1", num(m.a1)}, {"a2", num(m.a2)}, {"c1", num(m.c1)},
            {"c2", num(m.c2)}, {"w1", num(m.w1)}, {"w2", num(m.w2)}};
}

}  // namespace

std::string report_to_json(const analysis::Report& r, const std::optional<ReportFailure>& failure, bool field_valid) {
    const SweepPlan& p = r.meta.plan;
    ordered_json doc;
    doc["schema_version"] = kReportSchemaVersion;
    doc["meta"] = {{"timestamp", r.meta.timestamp},
                   {"device", r.meta.device},
                   {"source", to_string(r.meta.source)},
                   {"baseline_applied", r.meta.baseline_applied},
                   {"plan",
                    {{"start_mhz", p.start_khz() / 1000.0},
                     {"stop_mhz", p.stop_khz() / 1000.0},
                     {"step_mhz", p.step_khz() / 1000.0},
                     {"n_avg", p.n_avg},
                     {"settle_ms", p.settle_ms}}},
                   {"points", r.f_mhz.size()},
                   {"kernel_isa", r.kernel_isa}};
    doc["params"] = {{"d_mhz", r.params.d_mhz},
                     {"e_mhz", r.params.e_mhz},
                     {"gamma_mhz_per_mt", r.params.gamma_mhz_per_mt},
                     {"linewidth_mhz", r.params.linewidth_mhz}};
    doc["candidates_mhz"] = r.candidates_mhz;

    const auto sig = r.fit.sigmas();
    doc["fit"] = {{"params", model_json(r.fit.model)},
                  {"rss", num(r.fit.rss)},
                  {"iterations", r.fit.iterations},
                  {"converged", r.fit.converged},
                  {"gradient_norm", num(r.fit.gradient_norm)},
                  {"sigma", model_json(analysis::DoubleLorentzianModel::from_array(sig))}};

    if (field_valid) {
        doc["field"] = {{"b_mt", num(r.field.b_parallel_mt)},
                        {"d_mhz", num(r.field.d_est_mhz)},
                        {"splitting_mhz", num(r.field.splitting_mhz)},
                        {"clamped", r.field.clamped},
                        {"sigma_b_mt", num(r.field.sigma_b_mt)}};
    } else {
        doc["field"] = nullptr;
    }

    ordered_json res = ordered_json::array();
    for (double v : r.residuals_mv) res.push_back(num(v));
    doc["residuals"] = std::move(res);
    doc["f_mhz"] = r.f_mhz;

    if (failure) doc["error"] = {{"stage", failure->stage}, {"kind", failure->kind}, {"message", failure->message}};
    return doc.dump(2) + "\n";
}

std::vector<double> report_centers(const std::string& json_text) {
    const auto doc = nlohmann::json::parse(json_text);
    const auto& fit = doc.at("fit");
    const auto& params = fit.at("params");
    if (!fit.at("converged").get<bool>() || !params.at("c1").is_number() || !params.at("c2").is_number()) return {};
    return {params.at("c1").get<double>(), params.at("c2").get<double>()};
}

}  // namespace nvscope
