// hra-forge: command-line front end for the HEP / network / response-surface toolkit.

#include "hra/ann.hpp"
#include "hra/dataset.hpp"
#include "hra/error.hpp"
#include "hra/format.hpp"
#include "hra/pipeline.hpp"
#include "hra/psf.hpp"
#include "hra/report.hpp"
#include "hra/rsm/anova.hpp"
#include "hra/rsm/coding.hpp"
#include "hra/rsm/model.hpp"
#include "hra/rsm/screening.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace hra;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitNumerical = 4;

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return in;
}

ObservationSet read_observations(const std::string& path) {
    if (path.empty()) return bundled_case_study();
    auto in = open_input(path);
    return load_observations(in);
}

Design read_design(const std::string& path) {
    if (path.empty()) return bundled_table4();
    auto in = open_input(path);
    return load_design(in);
}

template <typename Writer>
void write_to(const fs::path& path, Writer&& writer) {
    std::ostringstream out;
    writer(out);
    pipeline::write_file_atomic(path, out.str());
}

// HRA_FORGE_THREADS caps the replication worker count.
unsigned thread_cap() {
    const char* env = std::getenv("HRA_FORGE_THREADS");
    if (env == nullptr || *env == '\0') return 0;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw InputError("HRA_FORGE_THREADS must be a positive integer");
    return static_cast<unsigned>(v);
}

std::pair<PsfId, std::string> split_assignment(const std::string& text, const char* what) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError(std::string(what) + " '" + text + "' is not LETTER=VALUE");
    std::string letter = text.substr(0, eq);
    while (!letter.empty() && letter.back() == ' ') letter.pop_back();
    const auto psf = letter.size() == 1 ? psf_from_letter(letter[0]) : psf_from_column(letter);
    if (!psf) throw InputError(std::string(what) + " '" + text + "': unknown PSF '" + letter + "'");
    return {*psf, text.substr(eq + 1)};
}

void print_anova(const rsm::AnovaTable& table) {
    std::printf("%-14s %12s %4s %12s %10s %10s\n", "source", "SS", "df", "MS", "F", "p");
    auto opt = [](const std::optional<double>& v) { return v ? format_short(*v) : std::string("-"); };
    for (const auto& row : table.rows) {
        std::printf("%-14s %12s %4d %12s %10s %10s\n", row.source().c_str(), format_short(row.sum_of_squares).c_str(),
                    row.df, opt(row.mean_square).c_str(), opt(row.f_value).c_str(), opt(row.p_value).c_str());
    }
}

// ---------------------------------------------------------------------------

struct QuantifyArgs {
    long long occurred = -1;
    long long potential = -1;
    std::vector<std::string> levels;
    std::vector<std::string> multipliers;
    std::string mode = "action";
    std::string tables;
};

int cmd_quantify(const QuantifyArgs& a) {
    if (a.occurred < 0 || a.potential < 1) throw InputError("need --occurred >= 0 and --potential >= 1");
    const ErrorTally tally{static_cast<std::uint64_t>(a.occurred), static_cast<std::uint64_t>(a.potential)};
    const auto nominal = nominal_hep(tally);

    MultiplierTables tables;
    if (a.tables.empty()) {
        tables = default_multiplier_tables();
    } else {
        auto in = open_input(a.tables);
        tables = load_multiplier_tables(in);
    }
    const auto mode = a.mode == "action"      ? MultiplierMode::Action
                      : a.mode == "diagnosis" ? MultiplierMode::Diagnosis
                                              : throw InputError("--mode must be action or diagnosis");

    auto psfs = PsfVector::nominal();
    std::optional<std::string> certain_failure;
    for (const auto& text : a.levels) {
        const auto [psf, label] = split_assignment(text, "--level");
        const auto it = tables.find(psf);
        if (it == tables.end()) throw LookupError("no multiplier table for " + std::string(psf_name(psf)));
        const auto m = lookup_multiplier(it->second, label, mode);
        if (std::holds_alternative<FailureCertain>(m)) {
            certain_failure = std::string(psf_name(psf)) + " = " + label;
        } else {
            psfs = psfs.with(psf, std::get<double>(m));
        }
    }
    for (const auto& text : a.multipliers) {
        const auto [psf, value] = split_assignment(text, "--multiplier");
        char* end = nullptr;
        const double v = std::strtod(value.c_str(), &end);
        if (value.empty() || *end != '\0') throw InputError("--multiplier '" + text + "': not a number");
        psfs = psfs.with(psf, v);
    }

    std::cout << "nominal_hep " << format_full(nominal.value()) << '\n';
    if (certain_failure) {
        std::cout << "psf_total FAIL\n";
        std::cout << "composite_hep 1\n";
        std::cerr << "certain failure: " << *certain_failure << '\n';
        return 0;
    }
    const double total = total_psf_impact(psfs);
    std::cout << "psf_total " << format_full(total) << '\n';
    std::cout << "composite_hep " << format_full(composite_hep(nominal, total).value()) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainingArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> replications;
};

ann::TrainingConfig training_config(const TrainingArgs& a) {
    ann::TrainingConfig cfg;
    if (!a.config.empty()) {
        auto in = open_input(a.config);
        cfg = ann::load_training_config(in);
    }
    if (a.seed) cfg.seed = *a.seed;
    if (a.replications) cfg.n_replications = *a.replications;
    cfg.threads = thread_cap();
    cfg.validate();
    return cfg;
}

struct TrainArgs {
    std::string observations;
    TrainingArgs training;
    std::string psfs = "ABCDEFGH";
    std::string out;
};

int cmd_train(const TrainArgs& a) {
    const auto observations = read_observations(a.observations);
    const auto cfg = training_config(a.training);
    const auto active = parse_psf_letters(a.psfs);
    const auto psfs = observations.psf_vectors();
    const auto heps = observations.heps();
    const auto prepared = ann::prepare(psfs, heps, active);
    const auto predictor = ann::train_replicated(prepared.data, ann::Topology::for_inputs(active.size(), cfg.hidden_nodes),
                                                 cfg, active, prepared.maxima);
    std::vector<double> predicted;
    for (const auto& x : prepared.data.inputs) predicted.push_back(predictor.predict_normalized(x));
    const auto report = ann::metrics(predicted, heps);

    fs::create_directories(a.out);
    write_to(fs::path(a.out) / "predictor.txt", [&](std::ostream& o) { ann::save_predictor(predictor, o); });
    write_to(fs::path(a.out) / "metrics.csv", [&](std::ostream& o) {
        o << "id,observed_hep,predicted_hep,se\n";
        for (std::size_t i = 0; i < observations.size(); ++i) {
            o << observations.instances()[i].id << ',' << format_full(heps[i]) << ',' << format_full(predicted[i])
              << ',' << format_full(report.squared_errors[i]) << '\n';
        }
    });
    write_to(fs::path(a.out) / "members.csv", [&](std::ostream& o) {
        o << "seed,final_loss,status\n";
        for (const auto& m : predictor.members()) o << m.seed << ',' << format_full(m.final_loss) << ",kept\n";
        for (auto s : predictor.dropped_seeds()) o << s << ",,diverged\n";
    });
    std::cout << "psfs " << psf_letters(active) << '\n';
    std::cout << "members " << predictor.members().size() << " dropped " << predictor.dropped_seeds().size() << '\n';
    std::cout << "mse " << format_short(report.mse) << '\n';
    if (report.r_squared) std::cout << "r_squared " << format_short(*report.r_squared) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct DesignArgs {
    std::string predictor;
    std::string design;
    bool generate = false;
    int center_points = 6;
    double center = 0.5;
    double half_range = 0.3;
    double axial = rsm::kDefaultAxial;
    std::string out;
};

int cmd_design(const DesignArgs& a) {
    auto in = open_input(a.predictor);
    const auto predictor = ann::load_predictor(in);
    Design design;
    if (a.generate) {
        if (a.center_points < 0) throw InputError("--center-points must be non-negative");
        const auto coding = rsm::FactorCoding::uniform(predictor.active_psfs(), {a.center, a.half_range}, a.axial);
        design = rsm::generate_ccd(predictor.active_psfs(), coding, a.center_points);
    } else {
        design = read_design(a.design);
    }
    const auto evaluated = rsm::evaluate_design(design, predictor);
    write_to(a.out, [&](std::ostream& o) { save_design(evaluated, o); });
    std::cout << "runs " << evaluated.size() << " factors " << psf_letters(evaluated.factors()) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct ModelArgs {
    std::string design;
    std::string model;
    double power = 3.0;
    double alpha = 0.05;
    std::string out;
};

struct ModelOutcome {
    Design design;
    rsm::FactorCoding coding;
    rsm::ModelSpec spec;
    std::vector<rsm::EliminationStep> steps;
    rsm::FitResult fit;
    rsm::AnovaTable table;
};

ModelOutcome fit_model(const ModelArgs& a) {
    if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw InputError("--alpha must lie in (0, 1)");
    if (!(a.power > 0.0)) throw InputError("--power must be positive");
    auto design = read_design(a.design);
    if (!design.fully_evaluated()) throw InputError("design has runs without a reliability value");
    auto coding = rsm::infer_coding(design);
    std::vector<rsm::EliminationStep> steps;
    rsm::ModelSpec spec = rsm::ModelSpec::full_quadratic(design.factors(), a.power);
    if (!a.model.empty()) {
        spec = rsm::ModelSpec(rsm::ModelSpec::parse(a.model).terms(), a.power);
    } else {
        auto reduced = rsm::backward_eliminate(design, spec, a.alpha, coding);
        spec = std::move(reduced.spec);
        steps = std::move(reduced.steps);
    }
    auto fit = rsm::fit(design, spec, coding);
    auto table = rsm::anova(fit, design);
    return ModelOutcome{std::move(design), std::move(coding), std::move(spec), std::move(steps), std::move(fit),
                        std::move(table)};
}

int cmd_anova(const ModelArgs& a) {
    const auto m = fit_model(a);
    std::cout << "model " << m.spec.to_string() << '\n';
    print_anova(m.table);
    std::cout << rsm::actual_equation(m.fit) << '\n';
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        write_to(fs::path(a.out) / "anova.csv", [&](std::ostream& o) { rsm::write_anova_csv(m.table, o); });
        write_to(fs::path(a.out) / "model.txt", [&](std::ostream& o) {
            o << "model " << m.spec.to_string() << '\n' << rsm::actual_equation(m.fit) << '\n';
        });
        write_to(fs::path(a.out) / "elimination.csv", [&](std::ostream& o) {
            o << "step,removed,p_value,residual_ss\n";
            for (std::size_t s = 0; s < m.steps.size(); ++s) {
                o << s + 1 << ',' << m.steps[s].removed.label() << ',' << format_full(m.steps[s].p_value) << ','
                  << format_full(m.steps[s].residual_ss_after) << '\n';
            }
        });
    }
    return 0;
}

int cmd_screen(const ModelArgs& a) {
    const auto m = fit_model(a);
    const auto report = rsm::screen_psfs(m.spec, m.design.factors(), &m.table);
    std::cout << "model " << m.spec.to_string() << '\n';
    std::cout << "eliminated " << (report.eliminated.empty() ? "-" : psf_letters(report.eliminated)) << '\n';
    std::cout << "retained " << (report.retained.empty() ? "-" : psf_letters(report.retained)) << '\n';
    for (PsfId p : report.eliminated) std::cout << "  not effective: " << psf_name(p) << '\n';
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        write_to(fs::path(a.out) / "screening.csv", [&](std::ostream& o) { rsm::write_screening_csv(report, o); });
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct PipelineArgs {
    std::string observations;
    std::string design;
    bool generate = false;
    std::string config;
    std::optional<double> alpha;
    std::optional<double> power;
    std::optional<std::uint64_t> seed;
    std::optional<int> replications;
    std::optional<int> max_iterations;
    std::string out;
};

int cmd_pipeline(const PipelineArgs& a) {
    const auto observations = read_observations(a.observations);
    pipeline::PipelineConfig cfg;
    if (!a.config.empty()) {
        auto in = open_input(a.config);
        cfg = pipeline::load_pipeline_config(in);
    }
    if (a.generate) cfg.design_source = pipeline::DesignSource::Generated;
    if (!a.design.empty()) {
        cfg.design_source = pipeline::DesignSource::Supplied;
        cfg.supplied_design = read_design(a.design);
    }
    if (a.alpha) cfg.alpha = *a.alpha;
    if (a.power) {
        cfg.response_power = *a.power;
        if (cfg.initial_model) cfg.initial_model = rsm::ModelSpec(cfg.initial_model->terms(), *a.power);
    }
    if (a.seed) cfg.training.seed = *a.seed;
    if (a.replications) cfg.training.n_replications = *a.replications;
    if (a.max_iterations) cfg.max_iterations = *a.max_iterations;
    cfg.training.threads = thread_cap();
    cfg.validate();

    const fs::path out(a.out);
    fs::create_directories(out);
    // Leftovers from an earlier, longer run would break byte-identical reruns.
    fs::remove_all(out / "iterations");
    fs::remove_all(out / "report");

    try {
        const auto result = pipeline::run(observations, cfg);
        pipeline::write_result(result, observations, out);
        for (const auto& rec : result.iterations) {
            std::cout << "iteration " << rec.index << ": psfs " << psf_letters(rec.active) << ", mse "
                      << format_short(rec.training_metrics.mse) << ", eliminated "
                      << (rec.screening.eliminated.empty() ? "-" : psf_letters(rec.screening.eliminated)) << '\n';
        }
        std::cout << "stopped: " << pipeline::to_string(result.reason) << "; retained "
                  << psf_letters(result.final_retained) << "; mse " << format_short(result.comparison.mse_before)
                  << " -> " << format_short(result.comparison.mse_after) << '\n';
        return result.reason == pipeline::ConvergenceReason::MaxIterations ? kExitNotConverged : 0;
    } catch (const pipeline::PipelineError& e) {
        pipeline::write_iterations(e.partial(), observations, out);
        std::cerr << "hra-forge: " << e.what() << " (" << e.partial().size() << " iteration(s) written)\n";
        return e.numerical() ? kExitNumerical : kExitInput;
    }
}

int cmd_report(const std::string& dir) {
    const auto files = report::generate(dir);
    for (const auto& f : files) std::cout << f.generic_string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Human error probability quantification and PSF screening"};
    app.name("hra-forge");
    app.require_subcommand(1, 1);

    QuantifyArgs qa;
    auto* quantify = app.add_subcommand("quantify", "Composite HEP from an error tally and PSF levels");
    quantify->add_option("--occurred", qa.occurred, "Errors that occurred")->required();
    quantify->add_option("--potential", qa.potential, "Opportunities for error")->required();
    quantify->add_option("--level", qa.levels, "PSF level, e.g. \"A=Expansive time\"");
    quantify->add_option("--multiplier", qa.multipliers, "Raw PSF multiplier, e.g. B=2");
    quantify->add_option("--mode", qa.mode, "action or diagnosis")->check(CLI::IsMember({"action", "diagnosis"}));
    quantify->add_option("--tables", qa.tables, "Multiplier table CSV");

    auto add_training = [](CLI::App* cmd, TrainingArgs& t) {
        cmd->add_option("--config", t.config, "Training config (key=value)");
        cmd->add_option("--seed", t.seed, "Base seed");
        cmd->add_option("--replications", t.replications, "Restarts averaged")->check(CLI::PositiveNumber);
    };

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train the network ensemble");
    train->add_option("--observations", ta.observations, "Observation CSV (default: bundled case study)");
    add_training(train, ta.training);
    train->add_option("--psfs", ta.psfs, "Active PSF letters");
    train->add_option("--out", ta.out, "Output directory")->required();

    DesignArgs da;
    auto* design = app.add_subcommand("design", "Evaluate a design through a trained predictor");
    design->add_option("--predictor", da.predictor, "Predictor file")->required();
    auto* design_path = design->add_option("--design", da.design, "Design CSV (default: bundled)");
    design->add_flag("--generate", da.generate, "Generate a central composite design")->excludes(design_path);
    design->add_option("--center-points", da.center_points, "Center runs for --generate");
    design->add_option("--center", da.center, "Actual level at coded 0");
    design->add_option("--half-range", da.half_range, "Actual distance of coded 1");
    design->add_option("--axial", da.axial, "Axial distance (coded)");
    design->add_option("--out", da.out, "Output CSV")->required();

    auto add_model = [](CLI::App* cmd, ModelArgs& m) {
        cmd->add_option("--design", m.design, "Evaluated design CSV (default: bundled)");
        cmd->add_option("--model", m.model, "Fixed term list, e.g. \"1, A, B, AB\"; default backward elimination");
        cmd->add_option("--power", m.power, "Response power transform");
        cmd->add_option("--alpha", m.alpha, "Elimination significance level");
        cmd->add_option("--out", m.out, "Output directory");
    };
    ModelArgs aa, sa;
    auto* anova = app.add_subcommand("anova", "Fit a quadratic response surface and print its ANOVA");
    add_model(anova, aa);
    auto* screen = app.add_subcommand("screen", "Report PSFs with no surviving model term");
    add_model(screen, sa);

    PipelineArgs pa;
    auto* pipe = app.add_subcommand("pipeline", "Run the train / design / fit / screen loop");
    pipe->add_option("--observations", pa.observations, "Observation CSV (default: bundled case study)");
    auto* pipe_design = pipe->add_option("--design", pa.design, "First-iteration design CSV (default: bundled)");
    pipe->add_flag("--generate", pa.generate, "Generated designs in every iteration")->excludes(pipe_design);
    pipe->add_option("--config", pa.config, "Pipeline config (key=value)");
    pipe->add_option("--alpha", pa.alpha, "Elimination significance level");
    pipe->add_option("--power", pa.power, "Response power transform");
    pipe->add_option("--seed", pa.seed, "Base seed");
    pipe->add_option("--replications", pa.replications, "Restarts averaged")->check(CLI::PositiveNumber);
    pipe->add_option("--max-iterations", pa.max_iterations, "Iteration limit")->check(CLI::PositiveNumber);
    pipe->add_option("--out", pa.out, "Result directory")->required();

    std::string report_dir;
    auto* rep = app.add_subcommand("report", "Plots (SVG + CSV) from a result directory");
    rep->add_option("--out,dir", report_dir, "Result directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*quantify) return cmd_quantify(qa);
        if (*train) return cmd_train(ta);
        if (*design) return cmd_design(da);
        if (*anova) return cmd_anova(aa);
        if (*screen) return cmd_screen(sa);
        if (*pipe) return cmd_pipeline(pa);
        if (*rep) return cmd_report(report_dir);
    } catch (const InputError& e) {
        std::cerr << "hra-forge: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "hra-forge: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        std::cerr << "hra-forge: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "hra-forge: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitInput;
}
