#include "hra/pipeline.hpp"

#include "hra/format.hpp"
#include "text.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hra::pipeline {

void PipelineConfig::validate() const {
    training.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    if (!(response_power > 0.0)) throw InputError("power must be positive");
    if (max_iterations < 1) throw InputError("max_iterations must be >= 1");
    if (min_psfs < 2) throw InputError("min_psfs must be >= 2");
    if (center_points < 0) throw InputError("center_points must be non-negative");
    if (!(axial > 0.0)) throw InputError("axial must be positive");
    if (!(generated_scale.half_range > 0.0)) throw InputError("half_range must be positive");
}

PipelineConfig load_pipeline_config(std::istream& in) {
    PipelineConfig config;
    std::ostringstream training_lines;
    detail::LineReader reader(in);
    std::string line;
    while (reader.next(line)) {
        const auto content = detail::trim(line);
        if (content.empty() || content.front() == '#') continue;
        const auto where = "config line " + std::to_string(reader.line_number());
        const auto eq = content.find('=');
        if (eq == std::string_view::npos) throw InputError(where + ": expected key=value");
        const std::string key(detail::trim(content.substr(0, eq)));
        const std::string value(detail::trim(content.substr(eq + 1)));
        auto as_double = [&]() {
            auto v = detail::parse_double(value);
            if (!v) throw InputError(where + ": '" + key + "' needs a number");
            return *v;
        };
        auto as_int = [&]() {
            auto v = detail::parse_int(value);
            if (!v) throw InputError(where + ": '" + key + "' needs an integer");
            return *v;
        };
        if (key == "alpha") {
            config.alpha = as_double();
        } else if (key == "power") {
            config.response_power = as_double();
        } else if (key == "max_iterations") {
            config.max_iterations = static_cast<int>(as_int());
        } else if (key == "min_psfs") {
            const auto v = as_int();
            if (v < 0) throw InputError(where + ": min_psfs must not be negative");
            config.min_psfs = static_cast<std::size_t>(v);
        } else if (key == "design") {
            if (value == "supplied" || value == "bundled") {
                config.design_source = DesignSource::Supplied;
            } else if (value == "generated") {
                config.design_source = DesignSource::Generated;
            } else {
                throw InputError(where + ": design must be bundled, supplied or generated");
            }
        } else if (key == "reevaluate_design") {
            if (value != "true" && value != "false") throw InputError(where + ": reevaluate_design must be true or false");
            config.reevaluate_supplied = value == "true";
        } else if (key == "center_points") {
            config.center_points = static_cast<int>(as_int());
        } else if (key == "axial") {
            config.axial = as_double();
        } else if (key == "center") {
            config.generated_scale.center = as_double();
        } else if (key == "half_range") {
            config.generated_scale.half_range = as_double();
        } else if (key == "initial_model") {
            config.initial_model = rsm::ModelSpec::parse(value);
        } else {
            training_lines << key << '=' << value << '\n';
        }
    }
    std::istringstream training_in(training_lines.str());
    config.training = ann::load_training_config(training_in);
    if (config.initial_model) config.initial_model = rsm::ModelSpec(config.initial_model->terms(), config.response_power);
    config.validate();
    return config;
}

std::string_view to_string(ConvergenceReason reason) noexcept {
    switch (reason) {
        case ConvergenceReason::NoElimination: return "no-elimination";
        case ConvergenceReason::MaxIterations: return "max-iterations";
        case ConvergenceReason::MinPsfs: return "min-psfs";
    }
    return "unknown";
}

Comparison compare_predictions(const std::vector<std::string>& ids, std::span<const double> observed,
                               std::span<const double> before, std::span<const double> after) {
    if (ids.size() != observed.size() || before.size() != observed.size() || after.size() != observed.size())
        throw InputError("comparison columns differ in length");
    Comparison c;
    const auto m_before = ann::metrics(before, observed);
    const auto m_after = ann::metrics(after, observed);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        c.rows.push_back(ComparisonRow{ids[i], observed[i], before[i], after[i], m_before.squared_errors[i],
                                       m_after.squared_errors[i]});
    }
    c.mse_before = m_before.mse;
    c.mse_after = m_after.mse;
    c.delta = c.mse_after - c.mse_before;
    return c;
}

Comparison compare_before_after(const ObservationSet& observations, const ann::TrainedPredictor& before,
                                const ann::TrainedPredictor& after) {
    std::vector<std::string> ids;
    std::vector<double> b, a;
    for (const auto& inst : observations.instances()) {
        ids.push_back(inst.id);
        b.push_back(before.predict(inst.psfs));
        a.push_back(after.predict(inst.psfs));
    }
    return compare_predictions(ids, observations.heps(), b, a);
}

namespace {

struct Trained {
    ann::TrainedPredictor predictor;
    std::vector<double> predicted;
    ann::MetricReport metrics;
};

Trained train_on(const ObservationSet& observations, const std::vector<PsfId>& active, const ann::TrainingConfig& cfg) {
    const auto psfs = observations.psf_vectors();
    const auto heps = observations.heps();
    auto prepared = ann::prepare(psfs, heps, active);
    const auto topology = ann::Topology::for_inputs(active.size(), cfg.hidden_nodes);
    auto predictor = ann::train_replicated(prepared.data, topology, cfg, active, prepared.maxima);
    std::vector<double> predicted;
    for (const auto& x : prepared.data.inputs) predicted.push_back(predictor.predict_normalized(x));
    auto metrics = ann::metrics(predicted, heps);
    return Trained{std::move(predictor), std::move(predicted), std::move(metrics)};
}

}  // namespace

PipelineResult run(const ObservationSet& observations, const PipelineConfig& config) {
    config.validate();
    if (observations.empty()) throw InputError("pipeline needs at least one observation");

    std::vector<PsfId> active(kAllPsfs.begin(), kAllPsfs.end());
    const bool supplied = config.design_source == DesignSource::Supplied;
    const rsm::FactorCoding base_coding =
        supplied ? rsm::infer_coding(config.supplied_design)
                 : rsm::FactorCoding::uniform(active, config.generated_scale, config.axial);
    // Generated designs always use the configured axial distance; the inferred
    // one only describes the supplied design.
    const rsm::FactorCoding generation_coding(base_coding.factors(), base_coding.scales(), config.axial);

    std::vector<IterationRecord> trail;
    try {
        for (int it = 1;; ++it) {
            auto trained = train_on(observations, active, config.training);
            const auto coding = base_coding.restricted_to(active);

            Design design;
            bool from_predictor = true;
            if (it == 1 && supplied && config.supplied_design.factors() == active) {
                design = config.supplied_design;
                if (!config.reevaluate_supplied && design.fully_evaluated()) {
                    from_predictor = false;
                } else {
                    design = rsm::evaluate_design(design, trained.predictor);
                }
            } else {
                design = rsm::evaluate_design(
                    rsm::generate_ccd(active, generation_coding.restricted_to(active), config.center_points),
                    trained.predictor);
            }

            rsm::ModelSpec reduced = rsm::ModelSpec::full_quadratic(active, config.response_power);
            std::vector<rsm::EliminationStep> steps;
            if (it == 1 && config.initial_model) {
                reduced = *config.initial_model;
            } else {
                auto eliminated = rsm::backward_eliminate(design, reduced, config.alpha, coding);
                reduced = std::move(eliminated.spec);
                steps = std::move(eliminated.steps);
            }
            auto fit = rsm::fit(design, reduced, coding);
            auto table = rsm::anova(fit, design);
            auto screening = rsm::screen_psfs(reduced, active, &table);

            trail.push_back(IterationRecord{
                .index = it,
                .active = active,
                .predictor = std::move(trained.predictor),
                .predicted_hep = std::move(trained.predicted),
                .training_metrics = std::move(trained.metrics),
                .design = std::move(design),
                .design_from_predictor = from_predictor,
                .fit = std::move(fit),
                .anova = std::move(table),
                .elimination = std::move(steps),
                .screening = screening,
            });

            const auto& last = trail.back();
            auto finish = [&](ann::TrainedPredictor final_predictor, std::vector<PsfId> retained, ConvergenceReason why) {
                auto comparison = compare_before_after(observations, trail.front().predictor, final_predictor);
                return PipelineResult{std::move(trail), std::move(final_predictor), std::move(retained), why,
                                      std::move(comparison)};
            };
            if (screening.eliminated.empty())
                return finish(last.predictor, active, ConvergenceReason::NoElimination);
            if (screening.retained.size() < config.min_psfs)
                return finish(last.predictor, active, ConvergenceReason::MinPsfs);
            active = screening.retained;
            if (it == config.max_iterations) {
                auto retrained = train_on(observations, active, config.training);
                return finish(std::move(retrained.predictor), active, ConvergenceReason::MaxIterations);
            }
        }
    } catch (const NumericalError& e) {
        throw PipelineError(e.what(), true, std::move(trail));
    } catch (const InputError& e) {
        throw PipelineError(e.what(), false, std::move(trail));
    }
}

// ---------------------------------------------------------------------------

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw InputError("failed writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw InputError("cannot rename " + tmp.string() + ": " + ec.message());
}

void write_comparison_csv(const Comparison& c, std::ostream& out) {
    out << "id,observed_hep,estimated_before,estimated_after,se_before,se_after\n";
    for (const auto& r : c.rows) {
        out << r.id << ',' << format_full(r.observed) << ',' << format_full(r.before) << ',' << format_full(r.after)
            << ',' << format_full(r.se_before) << ',' << format_full(r.se_after) << '\n';
    }
}

namespace {

template <typename Writer>
void emit(const std::filesystem::path& path, Writer&& writer) {
    std::ostringstream out;
    writer(out);
    write_file_atomic(path, out.str());
}

std::string iteration_dir_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d", index);
    return buf;
}

std::string letters_or_dash(const std::vector<PsfId>& psfs) { return psfs.empty() ? "-" : psf_letters(psfs); }

void write_iteration(const IterationRecord& rec, const ObservationSet& observations, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    emit(dir / "metrics.csv", [&](std::ostream& out) {
        out << "id,observed_hep,predicted_hep,se\n";
        for (std::size_t i = 0; i < observations.size(); ++i) {
            out << observations.instances()[i].id << ',' << format_full(observations.instances()[i].hep.value()) << ','
                << format_full(rec.predicted_hep[i]) << ',' << format_full(rec.training_metrics.squared_errors[i])
                << '\n';
        }
    });
    emit(dir / "members.csv", [&](std::ostream& out) {
        out << "seed,final_loss,status\n";
        for (const auto& m : rec.predictor.members()) out << m.seed << ',' << format_full(m.final_loss) << ",kept\n";
        for (auto s : rec.predictor.dropped_seeds()) out << s << ",,diverged\n";
    });
    emit(dir / "design.csv", [&](std::ostream& out) { save_design(rec.design, out); });
    emit(dir / "fit.csv", [&](std::ostream& out) {
        out << "std,run,reliability,predicted_reliability,transformed_response,fitted,residual\n";
        for (std::size_t i = 0; i < rec.design.size(); ++i) {
            const auto& row = rec.design.rows()[i];
            const auto predicted = rsm::predict_response(rec.fit, row.levels);
            out << row.std_order << ',' << row.run_order << ',' << format_full(*row.response) << ','
                << format_full(predicted.value) << ',' << format_full(rec.fit.response[i]) << ','
                << format_full(rec.fit.fitted[i]) << ',' << format_full(rec.fit.residuals[i]) << '\n';
        }
    });
    emit(dir / "model.txt", [&](std::ostream& out) {
        out << "model " << rec.fit.spec.to_string() << '\n';
        out << "design " << (rec.design_from_predictor ? "evaluated" : "supplied") << '\n';
        out << "r_squared " << format_full(rec.fit.r_squared) << '\n';
        out << "coding";
        for (std::size_t j = 0; j < rec.fit.coding.factors().size(); ++j) {
            const auto& s = rec.fit.coding.scales()[j];
            out << ' ' << psf_letter(rec.fit.coding.factors()[j]) << '=' << format_full(s.center) << '/'
                << format_full(s.half_range);
        }
        out << '\n';
        out << "term,coded,actual\n";
        for (std::size_t k = 0; k < rec.fit.spec.terms().size(); ++k) {
            out << rec.fit.spec.terms()[k].label() << ',' << format_full(rec.fit.coded_coefficients[k]) << ','
                << format_full(rec.fit.actual_coefficients[k]) << '\n';
        }
        out << rsm::actual_equation(rec.fit) << '\n';
    });
    emit(dir / "elimination.csv", [&](std::ostream& out) {
        out << "step,removed,p_value,residual_ss\n";
        for (std::size_t s = 0; s < rec.elimination.size(); ++s) {
            const auto& st = rec.elimination[s];
            out << s + 1 << ',' << st.removed.label() << ',' << format_full(st.p_value) << ','
                << format_full(st.residual_ss_after) << '\n';
        }
    });
    emit(dir / "anova.csv", [&](std::ostream& out) { rsm::write_anova_csv(rec.anova, out); });
    emit(dir / "screening.csv", [&](std::ostream& out) { rsm::write_screening_csv(rec.screening, out); });
    emit(dir / "predictor.txt", [&](std::ostream& out) { ann::save_predictor(rec.predictor, out); });
}

void write_summary(const std::vector<IterationRecord>& iterations, const std::filesystem::path& dir) {
    emit(dir / "summary.csv", [&](std::ostream& out) {
        out << "iteration,active,n_active,ensemble_mse,r_squared,model,eliminated,retained\n";
        for (const auto& rec : iterations) {
            out << rec.index << ',' << psf_letters(rec.active) << ',' << rec.active.size() << ','
                << format_full(rec.training_metrics.mse) << ','
                << (rec.training_metrics.r_squared ? format_full(*rec.training_metrics.r_squared) : std::string())
                << ",\"" << rec.fit.spec.to_string() << "\"," << letters_or_dash(rec.screening.eliminated) << ','
                << letters_or_dash(rec.screening.retained) << '\n';
        }
    });
}

}  // namespace

void write_iterations(const std::vector<IterationRecord>& iterations, const ObservationSet& observations,
                      const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "iterations");
    for (const auto& rec : iterations) write_iteration(rec, observations, dir / "iterations" / iteration_dir_name(rec.index));
    write_summary(iterations, dir);
}

void write_result(const PipelineResult& result, const ObservationSet& observations, const std::filesystem::path& dir) {
    write_iterations(result.iterations, observations, dir);
    emit(dir / "comparison.csv", [&](std::ostream& out) { write_comparison_csv(result.comparison, out); });
    emit(dir / "final_predictor.txt", [&](std::ostream& out) { ann::save_predictor(result.final_predictor, out); });
    emit(dir / "result.txt", [&](std::ostream& out) {
        out << "reason " << to_string(result.reason) << '\n';
        out << "iterations " << result.iterations.size() << '\n';
        out << "retained " << psf_letters(result.final_retained) << '\n';
        std::vector<PsfId> eliminated;
        for (PsfId p : kAllPsfs) {
            if (std::find(result.final_retained.begin(), result.final_retained.end(), p) == result.final_retained.end())
                eliminated.push_back(p);
        }
        out << "eliminated " << letters_or_dash(eliminated) << '\n';
        out << "mse_before " << format_full(result.comparison.mse_before) << '\n';
        out << "mse_after " << format_full(result.comparison.mse_after) << '\n';
    });
}

}  // namespace hra::pipeline
