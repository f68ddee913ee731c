#include "gaitprint/commands.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "gaitprint/error.hpp"
#include "gaitprint/parallel.hpp"
#include "gaitprint/persist.hpp"
#include "gaitprint/series_io.hpp"
#include "gaitprint/svg.hpp"

namespace gaitprint {
namespace fs = std::filesystem;

namespace {

struct Provenance {
    std::string hash;
    std::string comment() const { return "config_hash=" + hash; }
};

void write_file(const fs::path& path, const std::string& content)
{
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out)
        throw DataError("cannot write " + path.string());
}

void write_json(const fs::path& path, const json& j)
{
    write_file(path, j.dump(2) + "\n");
}

json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("missing file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("cannot parse " + path.string() + ": " + e.what());
    }
}

std::string csv_with_header(const Provenance& prov, const std::function<void(std::ostream&)>& body)
{
    std::ostringstream o;
    o << "# " << prov.comment() << '\n';
    body(o);
    return o.str();
}

std::vector<SubjectSeries> load_series(const ExperimentConfig& cfg)
{
    const auto path = cfg.out_dir / "series.gprt";
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("missing " + path.string() + " (run ingest first)");
    auto series = read_series_binary(in);
    if (series.empty())
        throw DataError("series store " + path.string() + " holds no subjects");
    std::sort(series.begin(), series.end(),
              [](const SubjectSeries& a, const SubjectSeries& b) { return a.subject_id < b.subject_id; });
    return series;
}

std::vector<std::string> row_subjects(const std::vector<RowKey>& rows)
{
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
        out.push_back(r.subject_id);
    return out;
}

int count_seconds(const std::vector<SubjectSeries>& series)
{
    int n = 0;
    for (const auto& s : series)
        n += s.J();
    return n;
}

std::string split_csv(const Provenance& prov, const SplitResult& split)
{
    return csv_with_header(prov, [&](std::ostream& o) {
        o << "subject,session,j,part\n";
        for (const auto* part : {&split.train, &split.test})
            for (const auto& s : *part)
                for (const auto& f : s.frames)
                    o << f.subject_id << ',' << f.session << ',' << f.j << ','
                      << (part == &split.train ? "train" : "test") << '\n';
    });
}

std::string matrix_csv(const Provenance& prov, const Eigen::MatrixXd& m)
{
    return csv_with_header(prov, [&](std::ostream& o) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index k = 0; k < m.cols(); ++k)
                o << (k ? "," : "") << format_double(m(i, k));
            o << '\n';
        }
    });
}

struct ModelIndex {
    std::string method;
    std::vector<std::pair<std::string, std::string>> models;  // subject, file
};

ModelIndex read_model_index(const ExperimentConfig& cfg)
{
    const auto j = read_json(cfg.out_dir / "train_report.json");
    ModelIndex idx;
    idx.method = j.at("method").get<std::string>();
    if (idx.method != cfg.method)
        throw ConfigError("models in " + cfg.out_dir.string() + " were trained with method " + idx.method +
                          ", config asks for " + cfg.method);
    for (const auto& m : j.at("models"))
        idx.models.emplace_back(m.at("subject").get<std::string>(), m.at("file").get<std::string>());
    if (idx.models.empty())
        throw DataError("train_report.json lists no models");
    return idx;
}

std::vector<GridModelArtifact> load_grid_models(const ExperimentConfig& cfg, const ModelIndex& idx)
{
    std::vector<GridModelArtifact> out;
    for (const auto& [subject, file] : idx.models) {
        auto a = grid_model_from_json(read_json(cfg.out_dir / file));
        if (a.fit.target != subject)
            throw DataError("model file " + file + " holds subject " + a.fit.target + ", expected " + subject);
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<FunModelArtifact> load_fun_models(const ExperimentConfig& cfg, const ModelIndex& idx)
{
    std::vector<FunModelArtifact> out;
    for (const auto& [subject, file] : idx.models) {
        auto a = fun_model_from_json(read_json(cfg.out_dir / file));
        if (a.fit.target != subject)
            throw DataError("model file " + file + " holds subject " + a.fit.target + ", expected " + subject);
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<SubjectSeries> keep_candidates(std::vector<SubjectSeries> series, const std::set<std::string>& candidates)
{
    std::vector<SubjectSeries> out;
    for (auto& s : series) {
        if (s.frames.empty())
            continue;
        if (!candidates.contains(s.subject_id)) {
            spdlog::warn("evaluate: subject {} has test seconds but no model, skipped", s.subject_id);
            continue;
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SensitivityRow> read_sensitivity_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("missing file " + path.string());
    std::vector<SensitivityRow> rows;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        if (!header) {
            header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        SensitivityRow r;
        std::getline(ss, cell, ',');
        r.window = std::stoi(cell);
        std::getline(ss, cell, ',');
        r.k = std::stoi(cell);
        std::getline(ss, cell, ',');
        r.accuracy = std::stod(cell);
        std::getline(ss, cell, ',');
        r.n_blocks = std::stoi(cell);
        rows.push_back(r);
    }
    return rows;
}

void draw_fingerprints(const ExperimentConfig& cfg, const Provenance& prov, const std::vector<CmaResult>& results)
{
    for (const bool adjusted : {true, false}) {
        const auto fps = fingerprint_report(results, cfg.grid, adjusted);
        for (const auto& fp : fps) {
            std::ostringstream o;
            SvgOptions opt;
            opt.title = "Subject " + fp.subject + (adjusted ? " (CMA-adjusted, " : " (unadjusted, ") +
                        std::to_string(fp.n_significant) + " cells)";
            opt.provenance = prov.comment();
            write_fingerprint_svg(o, fp, cfg.grid, opt);
            const auto name = "fingerprint_" + artifact_stem(fp.subject) + (adjusted ? "" : "_unadjusted") + ".svg";
            write_file(cfg.out_dir / "cma" / name, o.str());
        }
    }
}

void draw_sensitivity(const ExperimentConfig& cfg, const Provenance& prov, const std::vector<SensitivityRow>& rows)
{
    std::ostringstream o;
    SvgOptions opt;
    opt.title = "Accuracy by seconds averaged (" + cfg.method + ")";
    opt.provenance = prov.comment();
    write_sensitivity_svg(o, rows, opt);
    write_file(cfg.out_dir / "sensitivity.svg", o.str());
}

} // namespace

std::string artifact_stem(const std::string& subject)
{
    std::string out;
    for (unsigned char c : subject) {
        if (std::isalnum(c) || c == '-' || c == '.' || c == '_')
            out += static_cast<char>(c);
        else {
            static const char* hex = "0123456789abcdef";
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out.empty() ? std::string("_") : out;
}

IngestSummary cmd_ingest(const ExperimentConfig& cfg)
{
    const Provenance prov{config_hash(cfg)};
    if (cfg.data_path.empty())
        throw ConfigError("config: data.path is not set");
    auto report = load_accelerometry(cfg.data_path, cfg.schema);
    if (report.streams.empty())
        throw DataError("ingest: no accelerometry rows found under " + cfg.data_path.string());

    SegmentOptions seg;
    seg.samples_per_interval = cfg.samples_per_interval;
    seg.trim_transition_samples = static_cast<int>(std::lround(cfg.trim_transition_seconds * cfg.samples_per_interval));

    std::vector<SubjectSeries> series;
    json subjects = json::array();
    std::vector<std::string> dropped;
    IngestSummary summary;
    summary.rows_rejected = report.rows_rejected;
    for (auto& [subject, stream] : report.streams) {
        if (!cfg.require_sessions.empty()) {
            std::set<int> present;
            for (const auto& r : stream)
                present.insert(r.session);
            const bool complete = std::all_of(cfg.require_sessions.begin(), cfg.require_sessions.end(),
                                              [&](int k) { return present.contains(k); });
            if (!complete) {
                spdlog::info("ingest: subject {} lacks a required session, dropped", subject);
                dropped.push_back(subject);
                continue;
            }
        }
        if (!cfg.sessions.empty())
            std::erase_if(stream, [&](const RawSample& r) {
                return std::find(cfg.sessions.begin(), cfg.sessions.end(), r.session) == cfg.sessions.end();
            });
        auto s = segment_seconds(stream, seg);
        if (s.frames.empty()) {
            spdlog::warn("ingest: subject {} has no complete seconds, dropped", subject);
            dropped.push_back(subject);
            continue;
        }
        std::map<int, int> per_session;
        for (const auto& f : s.frames)
            ++per_session[f.session];
        json sessions = json::object();
        for (const auto& [k, n] : per_session)
            sessions[std::to_string(k)] = n;
        subjects.push_back(json{{"subject", subject}, {"seconds", s.J()}, {"sessions", sessions}});
        summary.seconds[subject] = s.J();
        series.push_back(std::move(s));
    }
    if (series.empty())
        throw DataError("ingest: no subject has a complete second of data");

    std::vector<int> counts;
    for (const auto& [_, n] : summary.seconds)
        counts.push_back(n);
    std::sort(counts.begin(), counts.end());
    const std::size_t m = counts.size();
    summary.median_seconds = m % 2 ? counts[m / 2] : 0.5 * (counts[m / 2 - 1] + counts[m / 2]);
    summary.n_subjects = static_cast<int>(series.size());

    std::ostringstream bin;
    write_series_binary(bin, series, prov.comment());
    write_file(cfg.out_dir / "series.gprt", bin.str());
    write_json(cfg.out_dir / "ingest_report.json",
               json{{"config_hash", prov.hash},
                    {"samples_per_interval", cfg.samples_per_interval},
                    {"rows_read", report.rows_read},
                    {"rows_filtered", report.rows_filtered},
                    {"rows_rejected", report.rows_rejected},
                    {"reject_examples", report.reject_examples},
                    {"n_subjects", summary.n_subjects},
                    {"median_seconds", summary.median_seconds},
                    {"dropped_subjects", dropped},
                    {"subjects", subjects}});
    spdlog::info("ingest: {} subjects, median {} seconds, {} rows rejected", summary.n_subjects,
                 summary.median_seconds, report.rows_rejected);
    return summary;
}

TrainSummary cmd_train(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Provenance prov{config_hash(cfg)};
    const auto series = load_series(cfg);
    const auto split = stratified_split(series, cfg.split);
    write_file(cfg.out_dir / "split.csv", split_csv(prov, split));

    TrainSummary summary;
    summary.n_train_seconds = count_seconds(split.train);
    summary.n_test_seconds = count_seconds(split.test);
    const int jobs = resolve_jobs(cfg.jobs);
    json models = json::array();
    json extra = json::object();

    std::set<std::string> stems;
    auto model_file = [&](const std::string& subject) {
        std::string stem = "model_" + artifact_stem(subject);
        for (int n = 2; stems.contains(stem); ++n)
            stem = "model_" + artifact_stem(subject) + "_" + std::to_string(n);
        stems.insert(stem);
        return "models/" + stem + ".json";
    };

    if (cfg.method == kMethodGridcell) {
        const auto design = featurize_series(split.train, cfg.grid, jobs);
        const auto screen = screen_predictors(design, cfg.screen_unique_frac, cfg.screen_freq_ratio);
        spdlog::info("train: {} training seconds, {} of {} cells kept after screening", design.X.rows(),
                     screen.report.kept.size(), design.X.cols());
        json sr = screen.report;
        sr["config_hash"] = prov.hash;
        write_json(cfg.out_dir / "screen_report.json", sr);
        extra["cells_total"] = design.X.cols();
        extra["cells_kept"] = screen.report.kept.size();

        auto fits = one_vs_rest_fit(screen.reduced.X, row_subjects(screen.reduced.rows), cfg.fit,
                                    screen.reduced.column_names(), jobs);
        summary.failures = fits.failures;
        for (auto& [subject, fit] : fits.fits) {
            GridModelArtifact a{prov.hash, cfg.grid, screen.report, std::move(fit)};
            const auto file = model_file(subject);
            write_json(cfg.out_dir / file, to_json(a));
            models.push_back(json{{"subject", subject}, {"file", file}, {"converged", a.fit.converged}});
            summary.models.push_back(subject);
        }
    } else {
        const auto bases = make_bases(cfg.samples_per_interval, cfg.funreg.degree, cfg.funreg.num_basis,
                                      cfg.grid.range_lo, cfg.grid.range_hi);
        if (cfg.funreg.dump_dsu)
            for (const auto& s : split.train) {
                const auto dsu = build_dsu_matrices(s, cfg.funreg.lag_stride);
                const auto stem = cfg.out_dir / "dsu" / artifact_stem(s.subject_id);
                write_file(stem.string() + "_D.csv", matrix_csv(prov, dsu.D));
                write_file(stem.string() + "_S.csv", matrix_csv(prov, dsu.S));
                write_file(stem.string() + "_U.csv", matrix_csv(prov, dsu.U));
                write_file(stem.string() + "_lmat.csv", matrix_csv(prov, dsu.lmat));
            }
        const auto penalty = make_penalty_blocks(bases, cfg.funreg.normalize_penalty);
        const auto design = build_tensor_design(split.train, bases, cfg.funreg.lag_stride, jobs);
        if (design.clamped > 0)
            spdlog::warn("train: {} lag-map points fell outside [{}, {}] and were clamped", design.clamped,
                         cfg.grid.range_lo, cfg.grid.range_hi);
        spdlog::info("train: {} training seconds, {} tensor coefficients, {} lambda candidates", design.C.rows(),
                     design.C.cols(), cfg.lambda_candidates().size());
        extra["tensor_coefficients"] = design.C.cols();
        extra["clamped_points"] = design.clamped;

        auto fits = funreg_one_vs_rest(design, penalty, cfg.funreg_config());
        summary.failures = fits.failures;
        for (auto& [subject, fit] : fits.fits) {
            FunModelArtifact a{prov.hash, bases, cfg.funreg.lag_stride, cfg.funreg.normalize_penalty, std::move(fit)};
            const auto file = model_file(subject);
            write_json(cfg.out_dir / file, to_json(a));
            models.push_back(json{{"subject", subject}, {"file", file}, {"converged", a.fit.converged},
                                  {"lambda", a.fit.lambda}});
            summary.models.push_back(subject);
        }
    }

    for (const auto& [subject, why] : summary.failures)
        spdlog::warn("train: model for {} failed: {}", subject, why);
    json report{{"config_hash", prov.hash},
                {"method", cfg.method},
                {"split_mode", to_string(cfg.split.mode)},
                {"train_seconds", summary.n_train_seconds},
                {"test_seconds", summary.n_test_seconds},
                {"n_models", summary.models.size()},
                {"n_failures", summary.failures.size()},
                {"failures", summary.failures},
                {"models", models}};
    report.update(extra);
    write_json(cfg.out_dir / "train_report.json", report);
    if (summary.models.empty())
        throw NumericalError("train: every one-vs-rest fit failed");
    spdlog::info("train: {} models written, {} failures", summary.models.size(), summary.failures.size());
    return summary;
}

EvaluateSummary cmd_evaluate(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Provenance prov{config_hash(cfg)};
    const auto idx = read_model_index(cfg);
    std::vector<std::string> candidates;
    for (const auto& [subject, _] : idx.models)
        candidates.push_back(subject);
    const std::set<std::string> candidate_set(candidates.begin(), candidates.end());

    const auto series = load_series(cfg);
    const auto test = keep_candidates(stratified_split(series, cfg.split).test, candidate_set);
    if (test.empty())
        throw DataError("evaluate: no test seconds for any modelled subject");
    const int jobs = resolve_jobs(cfg.jobs);

    Eigen::MatrixXd raw;
    std::vector<RowKey> rows;
    if (idx.method == kMethodGridcell) {
        const auto models = load_grid_models(cfg, idx);
        const auto design = featurize_series(test, models.front().grid, jobs);
        rows = design.rows;
        raw.resize(design.X.rows(), static_cast<Eigen::Index>(models.size()));
        const auto shared = apply_screen(design, models.front().screen);
        const auto shared_names = shared.column_names();
        parallel_for(models.size(), jobs, [&](std::size_t m) {
            const auto col = static_cast<Eigen::Index>(m);
            if (models[m].screen.kept == models.front().screen.kept) {
                raw.col(col) = predict_prob(models[m].fit, shared.X, shared_names);
            } else {
                const auto reduced = apply_screen(design, models[m].screen);
                raw.col(col) = predict_prob(models[m].fit, reduced.X, reduced.column_names());
            }
        });
    } else {
        const auto models = load_fun_models(cfg, idx);
        const auto design = build_tensor_design(test, models.front().bases, models.front().lag_stride, jobs);
        rows = design.rows;
        raw.resize(design.C.rows(), static_cast<Eigen::Index>(models.size()));
        for (std::size_t m = 0; m < models.size(); ++m) {
            if (models[m].fit.beta.size() != design.C.cols())
                throw DataError("evaluate: model " + models[m].fit.target + " uses a different basis");
            raw.col(static_cast<Eigen::Index>(m)) = funreg_predict_prob(models[m].fit, design.C);
        }
    }

    const auto probs = normalize_per_second(raw, rows, candidates);
    if (probs.degenerate_rows > 0)
        spdlog::warn("evaluate: {} seconds had all-zero probabilities and were spread uniformly",
                     probs.degenerate_rows);
    const auto blocks = average_probs(probs, kAllSeconds);
    EvaluateSummary out;
    out.report = rank_k_accuracy(blocks, candidates, cfg.ks);
    out.sensitivity = seconds_sensitivity(probs, cfg.sensitivity_windows, cfg.ks);

    json chance = json::object();
    for (int k : out.report.ks)
        chance["rank" + std::to_string(k)] =
            std::min(1.0, static_cast<double>(k) / static_cast<double>(candidates.size()));
    json rj{{"config_hash", prov.hash},
            {"method", idx.method},
            {"n_candidates", candidates.size()},
            {"test_seconds", probs.P.rows()},
            {"degenerate_seconds", probs.degenerate_rows},
            {"report", out.report},
            {"chance_accuracy", chance}};
    write_json(cfg.out_dir / "rank_report.json", rj);
    write_file(cfg.out_dir / "ranks.csv", csv_with_header(prov, [&](std::ostream& o) { write_rank_csv(o, out.report); }));
    write_file(cfg.out_dir / "sensitivity.csv",
               csv_with_header(prov, [&](std::ostream& o) { write_sensitivity_csv(o, out.sensitivity); }));
    write_file(cfg.out_dir / "probabilities.csv", csv_with_header(prov, [&](std::ostream& o) {
                   o << "subject,session,j";
                   for (const auto& c : candidates)
                       o << ',' << c;
                   o << '\n';
                   for (Eigen::Index i = 0; i < probs.P.rows(); ++i) {
                       const auto& r = probs.rows[static_cast<std::size_t>(i)];
                       o << r.subject_id << ',' << r.session << ',' << r.j;
                       for (Eigen::Index k = 0; k < probs.P.cols(); ++k)
                           o << ',' << format_double(probs.P(i, k));
                       o << '\n';
                   }
               }));
    draw_sensitivity(cfg, prov, out.sensitivity);

    for (int k : out.report.ks)
        spdlog::info("evaluate: rank-{} accuracy {:.4f} ({}/{})", k, out.report.accuracy.at(k),
                     out.report.correct.at(k), out.report.total);
    return out;
}

std::vector<CmaResult> cmd_cma(const ExperimentConfig& cfg)
{
    cfg.validate();
    if (cfg.method != kMethodGridcell)
        throw ConfigError("cma needs gridcell-logistic models");
    const Provenance prov{config_hash(cfg)};
    auto idx = read_model_index(cfg);
    if (!cfg.cma_subjects.empty()) {
        std::vector<std::pair<std::string, std::string>> keep;
        for (const auto& s : cfg.cma_subjects) {
            const auto it = std::find_if(idx.models.begin(), idx.models.end(),
                                         [&](const auto& m) { return m.first == s; });
            if (it == idx.models.end())
                throw ConfigError("cma: no model for subject " + s);
            keep.push_back(*it);
        }
        idx.models = std::move(keep);
    }
    const auto models = load_grid_models(cfg, idx);

    std::vector<CmaResult> results;
    std::ostringstream summary;
    summary << "# " << prov.comment() << '\n' << "subject,q,z,mc_se,n_adjusted,n_unadjusted,fit_converged\n";
    for (const auto& m : models) {
        CmaOptions opt;
        opt.alpha = cfg.cma_alpha;
        opt.n_mc = cfg.cma_n_mc;
        opt.seed = mix_seed(cfg.seed, fnv1a(m.fit.target));
        opt.jobs = cfg.jobs;
        auto r = cma_intervals(m.fit, opt);
        json j = r;
        j["config_hash"] = prov.hash;
        write_json(cfg.out_dir / "cma" / ("cma_" + artifact_stem(r.subject) + ".json"), j);
        summary << r.subject << ',' << format_double(r.q) << ',' << format_double(r.z) << ','
                << format_double(r.mc_se) << ',' << r.significant.size() << ',' << r.unadjusted_significant.size()
                << ',' << (r.fit_converged ? 1 : 0) << '\n';
        spdlog::info("cma: subject {} q={:.4f}, {} adjusted vs {} unadjusted significant cells", r.subject, r.q,
                     r.significant.size(), r.unadjusted_significant.size());
        results.push_back(std::move(r));
    }
    write_file(cfg.out_dir / "cma_summary.csv", summary.str());
    draw_fingerprints(cfg, prov, results);
    return results;
}

void cmd_plot(const ExperimentConfig& cfg)
{
    const Provenance prov{config_hash(cfg)};
    bool drew = false;
    if (fs::exists(cfg.out_dir / "sensitivity.csv")) {
        draw_sensitivity(cfg, prov, read_sensitivity_csv(cfg.out_dir / "sensitivity.csv"));
        drew = true;
    }
    std::vector<CmaResult> results;
    if (fs::is_directory(cfg.out_dir / "cma")) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(cfg.out_dir / "cma"))
            if (e.path().extension() == ".json" && e.path().filename().string().rfind("cma_", 0) == 0)
                files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            results.push_back(read_json(f).get<CmaResult>());
    }
    if (!results.empty()) {
        draw_fingerprints(cfg, prov, results);
        drew = true;
    }
    if (!drew)
        throw DataError("plot: nothing to draw in " + cfg.out_dir.string() + " (run evaluate or cma first)");
}

int run_guarded(const std::function<void()>& body)
{
    try {
        body();
        return 0;
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const DataError& e) {
        spdlog::error("{}", e.what());
        return 3;
    } catch (const NumericalError& e) {
        spdlog::error("{}", e.what());
        return 4;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}

} // namespace gaitprint
