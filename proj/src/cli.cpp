#include "iml/cli.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "iml/instance.hpp"
#include "iml/linalg.hpp"

namespace iml {

namespace {

struct Options {
    std::string command;
    std::string instance;
    std::optional<double> tol;
    std::optional<std::string> out;
    std::optional<unsigned> seed;
};

/// Accumulates named pass/fail checks for the report.
class Checks {
public:
    void add(const std::string& name, double value, double tol, bool pass, const std::string& note = "") {
        Json c;
        c["name"] = name;
        c["value"] = value;
        c["tol"] = tol;
        c["status"] = pass ? "pass" : "fail";
        if (!note.empty()) c["note"] = note;
        list_.push_back(std::move(c));
        all_ &= pass;
    }
    void fail(const std::string& name, const std::string& note) {
        Json c;
        c["name"] = name;
        c["value"] = nullptr;
        c["tol"] = nullptr;
        c["status"] = "fail";
        c["note"] = note;
        list_.push_back(std::move(c));
        all_ = false;
    }
    void skip(const std::string& name, const std::string& note) {
        Json c;
        c["name"] = name;
        c["value"] = nullptr;
        c["tol"] = nullptr;
        c["status"] = "skipped";
        c["note"] = note;
        list_.push_back(std::move(c));
    }
    bool pass() const { return all_; }
    const Json& json() const { return list_; }

private:
    Json list_ = Json::array();
    bool all_ = true;
};

Json header(const Options& o) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["tool"] = kToolVersion;
    j["command"] = o.command;
    return j;
}

Json summary(const Instance& inst) {
    Json j;
    if (!inst.description.empty()) j["description"] = inst.description;
    j["rank"] = inst.rank;
    j["punctures"] = inst.punctures.size();
    j["include_infinity"] = inst.include_infinity;
    j["seed"] = inst.seed;
    return j;
}

Json complex_list(const std::vector<Complex>& zs) {
    Json j = Json::array();
    for (Complex z : zs) j.push_back(complex_json(z));
    return j;
}

Json one_based(const std::vector<int>& v) {
    Json j = Json::array();
    for (int k : v) j.push_back(k + 1);
    return j;
}

Json invariants_json(const InvariantVector& inv) {
    Json j = Json::array();
    for (std::size_t k = 0; k < inv.words.size(); ++k) {
        Json e;
        e["word"] = one_based(inv.words[k]);
        e["trace"] = complex_json(inv.values[k]);
        j.push_back(std::move(e));
    }
    return j;
}

Json monodromy_json(const MonodromyRep& rep) {
    Json j;
    j["convention"] = rep.convention;
    j["basepoint"] = complex_json(rep.basepoint);
    j["cut_angle"] = rep.cut_angle;
    j["order"] = one_based(rep.order);
    Json mats = Json::array();
    for (std::size_t i = 0; i < rep.matrices.size(); ++i) {
        Json m;
        m["puncture"] = i + 1;
        m["matrix"] = matrix_json(rep.matrices[i]);
        m["eigenvalues"] = complex_list(linalg::eigenvalues(rep.matrices[i]));
        m["error_bound"] = rep.error_bounds[i];
        mats.push_back(std::move(m));
    }
    j["matrices"] = std::move(mats);
    if (rep.infinity) {
        j["infinity"] = matrix_json(*rep.infinity);
        j["infinity_error_bound"] = rep.infinity_error;
    } else {
        j["infinity"] = nullptr;
    }
    j["relation_residual"] = rep.relation_residual;
    j["relation_bound"] = rep.relation_bound;
    return j;
}

Json rh_json(const RhConsistency& rh) {
    Json j;
    j["deviation"] = rh.deviation;
    j["max_deviation"] = rh.max_deviation;
    j["tol"] = rh.tol;
    j["status"] = rh.pass ? "pass" : "fail";
    return j;
}

Json lambda_class_json(const LambdaClass& c) {
    Json j;
    j["kind"] = to_string(c.kind);
    if (c.kind == LambdaClass::Kind::Resonant) {
        j["puncture"] = c.puncture + 1;
        j["pair"] = Json::array({c.j + 1, c.k + 1});
    }
    if (c.kind == LambdaClass::Kind::ReducibleSpecial) {
        j["subset_size"] = c.s;
        Json subsets = Json::array();
        for (const auto& s : c.subsets) subsets.push_back(one_based(s));
        j["subsets"] = std::move(subsets);
        j["sum"] = exponent_json(c.witness_sum);
    }
    j["budget_exceeded"] = c.budget_exceeded;
    return j;
}

Json residues_json(const std::vector<CMatrix>& residues) {
    Json j = Json::array();
    for (const auto& a : residues) j.push_back(matrix_json(a));
    return j;
}

Json records_json(const std::vector<TransformRecord>& recs) {
    Json j = Json::array();
    for (const auto& r : recs) j.push_back(record_json(r));
    return j;
}

// ---------------------------------------------------------------- monodromy

int cmd_monodromy(const Instance& inst, const Options& o, Json& rep_out) {
    const auto sys = inst.system();
    const auto lambda = inst.exponents();
    const double rh_tol = o.tol.value_or(inst.tolerances.rh);

    const auto rep = monodromy_rep(sys, inst.tolerances.transport);
    const ParabolicConnection loose{sys, lambda, {}, {}};
    const auto rh = check_rh_consistency(loose, rep, rh_tol);
    const auto singular = is_singular_point(rep, lambda, inst.tolerances.reducibility);

    Checks checks;
    checks.add("relation", rep.relation_residual, inst.tolerances.relation,
               rep.relation_residual <= inst.tolerances.relation);
    checks.add("rh_consistency", rh.max_deviation, rh_tol, rh.pass);

    rep_out["monodromy"] = monodromy_json(rep);
    rep_out["lambda"] = exponent_table_json(lambda);
    rep_out["lambda_class"] = lambda_class_json(classify_lambda(lambda, 1e-7));
    rep_out["rh"] = rh_json(rh);
    Json s;
    s["singular"] = singular.singular;
    s["reducible"] = singular.reducible;
    s["search_complete"] = singular.search_complete;
    s["witness"] = singular.witness;
    rep_out["singular_locus"] = std::move(s);
    rep_out["checks"] = checks.json();
    return checks.pass() ? kExitPass : kExitCheckFailed;
}

// ---------------------------------------------------------------- stability

Json candidate_json(const SubbundleCandidate& c, const SlopeComparison& cmp, const std::string& origin) {
    Json j;
    j["label"] = c.label;
    j["origin"] = origin;
    j["rank"] = c.rank;
    j["degree"] = c.degree;
    Json jumps = Json::array();
    for (const auto& row : c.jumps) jumps.push_back(row);
    j["jumps"] = std::move(jumps);
    j["slope"] = rational_json(cmp.slope_sub);
    j["slope_total"] = rational_json(cmp.slope_total);
    j["violates"] = cmp.violates;
    return j;
}

int cmd_stability(const Instance& inst, const Options& o, Json& rep_out) {
    if (!inst.weights) throw Error(ErrorKind::InvalidInput, "stability needs a 'weights' table");
    const auto conn = inst.connection();
    const auto& w = *inst.weights;
    const int r = inst.rank;
    const double tol = o.tol.value_or(kDefaultTol);

    std::vector<SubbundleCandidate> candidates;
    std::vector<std::string> origin;
    bool complete = true;
    std::string note;
    if (r > 3) {
        complete = false;
        note = "rank budget: automatic candidate search covers r <= 3";
    } else if (r > 1) {
        auto search = residue_invariant_subspaces(conn.system, 3, tol, &conn.flags);
        complete = search.complete;
        note = search.note;
        int k = 0;
        for (const auto& sub : search.subspaces) {
            candidates.push_back(candidate_from_subspace(conn, sub, "V" + std::to_string(++k), tol));
            origin.push_back("search");
        }
    }
    int k = 0;
    for (auto c : inst.candidates) {
        if (c.label.empty()) c.label = "U" + std::to_string(++k);
        candidates.push_back(std::move(c));
        origin.push_back("instance");
    }
    auto result = stability_test(conn, w, candidates, complete);
    if (result.verdict == StabilityResult::Verdict::Undecided && !note.empty()) result.reason = note;

    const auto cert = check_weight_genericity(w, conn.exponents.degree(), o.seed.value_or(inst.seed));

    Rational total = conn.exponents.degree();
    for (const auto& row : w.alpha())
        for (const auto& a : row) total += a;

    rep_out["degree"] = conn.exponents.degree();
    Json weights = Json::array();
    for (const auto& row : w.alpha()) {
        Json out = Json::array();
        for (const auto& a : row) out.push_back(rational_json(a));
        weights.push_back(std::move(out));
    }
    rep_out["weights"] = std::move(weights);
    rep_out["slope_total"] = rational_json(total / Rational(r));
    Json cands = Json::array();
    for (std::size_t i = 0; i < result.comparisons.size(); ++i)
        cands.push_back(candidate_json(candidates[i], result.comparisons[i], origin[i]));
    rep_out["candidates"] = std::move(cands);
    rep_out["search_complete"] = complete;
    Json g;
    g["generic"] = cert.generic;
    g["exhaustive"] = cert.exhaustive;
    g["checked"] = cert.checked;
    g["witness"] = cert.witness;
    rep_out["weight_genericity"] = std::move(g);
    rep_out["verdict"] = to_string(result.verdict);
    rep_out["reason"] = result.reason;
    rep_out["witness"] = result.witness >= 0 ? Json(result.comparisons[result.witness].label) : Json(nullptr);
    return kExitPass;
}

// ---------------------------------------------------------------- transform

struct Directive {
    std::string verb;
    bool inverse = false;
    std::optional<int> i, j, dir;
    ExponentOrder order = ExponentOrder::DecreasingRe;
    std::string text;
};

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<Directive> parse_script(const std::string& script) {
    std::vector<Directive> out;
    std::stringstream all(script);
    std::string piece;
    while (std::getline(all, piece, ';')) {
        piece = trim(piece);
        if (piece.empty()) continue;
        std::stringstream words(piece);
        Directive d;
        d.text = piece;
        words >> d.verb;
        std::string tok;
        while (words >> tok) {
            if (tok == "inverse" && d.verb == "elm") {
                d.inverse = true;
                continue;
            }
            auto eq = tok.find('=');
            if (eq == std::string::npos) throw Error(ErrorKind::InvalidInput, "script: bad token '" + tok + "'");
            std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
            auto as_int = [&]() {
                try {
                    std::size_t used = 0;
                    int v = std::stoi(val, &used);
                    if (used != val.size()) throw std::invalid_argument(val);
                    return v;
                } catch (const std::exception&) {
                    throw Error(ErrorKind::InvalidInput, "script: '" + tok + "' needs an integer");
                }
            };
            if (key == "i") d.i = as_int();
            else if (key == "j") d.j = as_int();
            else if (key == "dir") d.dir = as_int();
            else if (key == "order") {
                if (val == "decreasing") d.order = ExponentOrder::DecreasingRe;
                else if (val == "increasing") d.order = ExponentOrder::IncreasingRe;
                else throw Error(ErrorKind::InvalidInput, "script: order must be decreasing or increasing");
            } else {
                throw Error(ErrorKind::InvalidInput, "script: unknown parameter '" + key + "'");
            }
        }
        static const std::vector<std::string> verbs = {"elm", "twist", "permute", "normalize", "balance"};
        if (std::find(verbs.begin(), verbs.end(), d.verb) == verbs.end())
            throw Error(ErrorKind::InvalidInput, "script: unknown directive '" + d.verb + "'");
        out.push_back(std::move(d));
    }
    return out;
}

int puncture_arg(const Directive& d, std::size_t n) {
    if (!d.i) throw Error(ErrorKind::InvalidInput, "script: '" + d.text + "' needs i=");
    if (*d.i < 1 || static_cast<std::size_t>(*d.i) > n)
        throw Error(ErrorKind::IndexOutOfRange, "script: puncture index out of range in '" + d.text + "'");
    return *d.i - 1;
}

bool in_window(const ExponentData& lambda) {
    for (const auto& row : lambda.rows())
        for (const auto& e : row) {
            if (e.exact) {
                if (e.exact->re < 0 || e.exact->re >= 1) return false;
            } else if (e.value.real() < -1e-12 || e.value.real() >= 1.0) {
                return false;
            }
        }
    return true;
}

int cmd_transform(const Instance& inst, const Options& o, Json& rep_out) {
    const auto start = inst.connection();
    const auto script = parse_script(inst.script);
    const double tol = o.tol.value_or(inst.tolerances.invariant);
    const std::size_t n = inst.punctures.size();

    ParabolicConnection conn = start;
    std::vector<TransformRecord> records;
    std::optional<std::pair<int, int>> last_elm;
    bool normalized = false;
    for (const auto& d : script) {
        if (d.verb == "elm" && d.inverse) {
            std::pair<int, int> ij;
            if (d.i || d.j) {
                if (!d.j) throw Error(ErrorKind::InvalidInput, "script: '" + d.text + "' needs j=");
                ij = {puncture_arg(d, n), *d.j};
            } else if (last_elm) {
                ij = *last_elm;
            } else {
                throw Error(ErrorKind::InvalidInput, "script: 'elm inverse' without a preceding elm");
            }
            auto [next, recs] = elm_inverse(conn, ij.first, ij.second);
            conn = std::move(next);
            records.insert(records.end(), recs.begin(), recs.end());
            last_elm.reset();
        } else if (d.verb == "elm") {
            if (!d.j) throw Error(ErrorKind::InvalidInput, "script: '" + d.text + "' needs j=");
            int i = puncture_arg(d, n);
            auto [next, rec] = elm(conn, i, *d.j);
            conn = std::move(next);
            records.push_back(std::move(rec));
            last_elm = {i, *d.j};
        } else if (d.verb == "twist") {
            int dir = d.dir.value_or(1);
            if (dir != 1 && dir != -1) throw Error(ErrorKind::InvalidInput, "script: dir must be +1 or -1");
            auto [next, rec] = twist_b(conn, puncture_arg(d, n), dir);
            conn = std::move(next);
            records.push_back(std::move(rec));
        } else if (d.verb == "permute") {
            auto [next, rec] = permute_a(conn, puncture_arg(d, n), d.order);
            conn = std::move(next);
            records.push_back(std::move(rec));
        } else if (d.verb == "normalize") {
            auto [next, recs] = normalize_sigma(conn);
            conn = std::move(next);
            records.insert(records.end(), recs.begin(), recs.end());
            normalized = true;
        } else if (d.verb == "balance") {
            auto [next, rec] = balance_frame(conn);
            conn = std::move(next);
            records.push_back(std::move(rec));
        }
    }

    Checks checks;
    const int words = inst.options.word_budget;
    const auto rep0 = monodromy_rep(start.system, inst.tolerances.transport);
    const auto rep1 = monodromy_rep(conn.system, inst.tolerances.transport, rep0.cut_angle);
    const double dev = invariant_distance(rep_invariants(rep0, words), rep_invariants(rep1, words));
    checks.add("invariants", dev, tol, dev <= tol);
    const auto compat = check_compatibility(conn, std::max(inst.tolerances.compatibility, 1e-8));
    checks.add("compatibility", compat.max_residual, compat.tol, compat.pass);
    if (normalized) checks.add("normalized_window", in_window(conn.exponents) ? 0.0 : 1.0, 0.0, in_window(conn.exponents));

    Json steps = Json::array();
    for (const auto& d : script) steps.push_back(d.text);
    rep_out["script"] = std::move(steps);
    rep_out["transforms"] = records_json(records);
    rep_out["lambda_before"] = exponent_table_json(start.exponents);
    rep_out["lambda_after"] = exponent_table_json(conn.exponents);
    rep_out["degree_before"] = start.exponents.degree();
    rep_out["degree_after"] = conn.exponents.degree();
    rep_out["invariant_deviation"] = dev;
    rep_out["checks"] = checks.json();
    rep_out["output_instance"] = instance_json(inst, conn);
    return checks.pass() ? kExitPass : kExitCheckFailed;
}

// ---------------------------------------------------------------- flow

FlowOptions flow_options(const Instance& inst) {
    FlowOptions f;
    f.tol = inst.tolerances.flow;
    f.blowup = inst.options.blowup;
    f.regularize = inst.options.regularize;
    return f;
}

Json flow_json(const FlowResult& r) {
    Json j;
    j["accepted_steps"] = r.accepted;
    j["rejected_steps"] = r.rejected;
    j["sum_drift"] = r.sum_drift;
    j["spectrum_drift"] = r.spectrum_drift;
    j["transforms"] = records_json(r.transforms);
    Json end;
    end["punctures"] = complex_list(r.endpoint.system.sphere().punctures());
    end["include_infinity"] = r.endpoint.system.sphere().include_infinity();
    end["residues"] = residues_json(r.endpoint.system.residues());
    end["lambda"] = exponent_table_json(r.endpoint.exponents);
    j["endpoint"] = std::move(end);
    Json table = Json::array();
    for (const auto& c : r.checkpoints) {
        Json row;
        row["s"] = c.s;
        row["punctures"] = complex_list(c.punctures);
        row["residues"] = residues_json(c.residues);
        table.push_back(std::move(row));
    }
    j["checkpoints"] = std::move(table);
    return j;
}

Json isomonodromy_json(const IsomonodromyReport& iso) {
    Json j;
    j["cut_angle"] = iso.cut_angle;
    j["order"] = one_based(iso.order);
    j["deviation"] = iso.deviation;
    j["transport_bound"] = iso.transport_bound;
    j["tol"] = iso.tol;
    j["status"] = iso.pass ? "pass" : "fail";
    j["start"] = invariants_json(iso.start);
    j["end"] = invariants_json(iso.end);
    return j;
}

int cmd_flow(const Instance& inst, const Options& o, Json& rep_out) {
    if (!inst.path) throw Error(ErrorKind::InvalidInput, "flow needs a deformation 'path'");
    const auto conn = inst.connection();
    const double tol = o.tol.value_or(inst.tolerances.isomonodromy);
    const auto result = flow(conn, *inst.path, flow_options(inst));
    const auto iso = verify_isomonodromy(conn, result, tol, inst.tolerances.transport);

    Checks checks;
    checks.add("conservation", result.sum_drift, inst.tolerances.conservation,
               result.sum_drift <= inst.tolerances.conservation);
    checks.add("isospectrality", result.spectrum_drift, inst.tolerances.spectrum,
               result.spectrum_drift <= inst.tolerances.spectrum);
    checks.add("isomonodromy", iso.deviation, tol, iso.pass);

    rep_out["flow"] = flow_json(result);
    rep_out["isomonodromy"] = isomonodromy_json(iso);
    rep_out["checks"] = checks.json();
    return checks.pass() ? kExitPass : kExitCheckFailed;
}

// ---------------------------------------------------------------- verify

CMatrix random_frame(int r, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    CMatrix g = CMatrix::Identity(r, r);
    for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b) g(a, b) += 0.5 * Complex(u(rng), u(rng));
    return g;
}

bool same_row(const std::vector<Exponent>& a, const std::vector<Exponent>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (!a[k].same_as(b[k], 1e-9)) return false;
    return true;
}

void check_transform_invariance(const ParabolicConnection& conn, const Instance& inst, const MonodromyRep& rep0,
                                unsigned seed, Checks& checks) {
    const int words = inst.options.word_budget;
    const double tol = inst.tolerances.invariant;
    const auto inv0 = rep_invariants(rep0, words);
    const int r = conn.system.rank();
    auto measure = [&](const std::string& name, const ParabolicConnection& next, bool recipe_ok) {
        const auto rep1 = monodromy_rep(next.system, inst.tolerances.transport, rep0.cut_angle);
        const double dev = invariant_distance(inv0, rep_invariants(rep1, words));
        checks.add(name, dev, tol, dev <= tol && recipe_ok, recipe_ok ? "" : "exponent recipe violated");
    };
    auto guarded = [&](const std::string& name, auto&& body) {
        try {
            body();
        } catch (const Error& e) {
            checks.fail(name, e.what());
        }
    };

    guarded("invariance.twist", [&] {
        auto [next, rec] = twist_b(conn, 0, 1);
        std::vector<Exponent> expect;
        for (const auto& e : conn.exponents.row(0)) expect.push_back(e.shifted(-1));
        measure("invariance.twist", next, same_row(rec.after, expect) && rec.degree_delta == r);
    });
    if (r >= 2) {
        guarded("invariance.elm", [&] {
            auto [next, rec] = elm(conn, 0, 1);
            const auto& row = conn.exponents.row(0);
            std::vector<Exponent> expect(row.begin() + 1, row.end());
            expect.push_back(row[0].shifted(1));
            measure("invariance.elm", next, same_row(rec.after, expect) && rec.degree_delta == -1);
        });
        guarded("invariance.permute", [&] {
            auto [next, rec] = permute_a(conn, 0, ExponentOrder::IncreasingRe);
            auto a = rec.after, b = conn.exponents.row(0);
            auto key = [](const Exponent& x, const Exponent& y) {
                int c = compare_re(x, y);
                return c != 0 ? c < 0 : compare_im(x, y) < 0;
            };
            std::sort(a.begin(), a.end(), key);
            std::sort(b.begin(), b.end(), key);
            measure("invariance.permute", next, same_row(a, b) && rec.degree_delta == 0);
        });
    }
    guarded("invariance.conjugation", [&] {
        std::mt19937 rng(seed);
        auto [next, rec] = conjugate(conn, random_frame(r, rng), "seeded random frame");
        measure("invariance.conjugation", next, same_row(rec.after, rec.before));
    });
}

int cmd_verify(const Instance& inst, const Options& o, Json& rep_out) {
    const auto sys = inst.system();
    const auto lambda = inst.exponents();
    const double rh_tol = o.tol.value_or(inst.tolerances.rh);
    const unsigned seed = o.seed.value_or(inst.seed);
    Checks checks;

    std::optional<ParabolicConnection> conn;
    try {
        conn = inst.connection();
        const auto compat = check_compatibility(*conn, inst.tolerances.compatibility);
        checks.add("compatibility", compat.max_residual, compat.tol, compat.pass);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::SpectrumMismatch && e.kind() != ErrorKind::FlagDegenerate) throw;
        checks.fail("compatibility", e.what());
    }

    const auto rep = monodromy_rep(sys, inst.tolerances.transport);
    checks.add("relation", rep.relation_residual, inst.tolerances.relation,
               rep.relation_residual <= inst.tolerances.relation);
    const auto rh = check_rh_consistency(ParabolicConnection{sys, lambda, {}, {}}, rep, rh_tol);
    checks.add("rh_consistency", rh.max_deviation, rh_tol, rh.pass);

    if (!conn) {
        checks.skip("conservation", "no valid connection");
        checks.skip("invariance", "no valid connection");
    } else {
        if (inst.path) {
            const auto result = flow(*conn, *inst.path, flow_options(inst));
            checks.add("conservation", result.sum_drift, inst.tolerances.conservation,
                       result.sum_drift <= inst.tolerances.conservation);
            checks.add("isospectrality", result.spectrum_drift, inst.tolerances.spectrum,
                       result.spectrum_drift <= inst.tolerances.spectrum);
            const auto iso = verify_isomonodromy(*conn, result, inst.tolerances.isomonodromy, inst.tolerances.transport);
            checks.add("isomonodromy", iso.deviation, iso.tol, iso.pass);
        } else {
            checks.skip("conservation", "instance has no deformation path");
        }
        check_transform_invariance(*conn, inst, rep, seed, checks);
    }

    // oracle cross-check on a short ray from the basepoint along the cut
    {
        double d = 1e300;
        for (Complex t : inst.punctures) d = std::min(d, std::abs(t - inst.basepoint));
        const Complex z0 = inst.basepoint;
        const Path ray{z0, z0 + 0.5 * d * std::polar(1.0, rep.cut_angle)};
        const auto adaptive = transport(sys, ray, inst.tolerances.transport);
        const CMatrix oracle = oracle_transport(sys, ray, inst.options.oracle_steps);
        const double diff = (adaptive.value - oracle).norm() / std::max(1.0, adaptive.value.norm());
        checks.add("oracle", diff, inst.tolerances.oracle, diff <= inst.tolerances.oracle,
                   std::to_string(inst.options.oracle_steps) + " steps");
    }

    const auto dim = moduli_dimension(0, inst.rank, static_cast<int>(inst.punctures.size()));
    Json dj;
    dj["genus"] = 0;
    dj["rank"] = inst.rank;
    dj["punctures"] = inst.punctures.size();
    dj["value"] = dim.value;
    dj["warning"] = dim.warning ? Json(*dim.warning) : Json(nullptr);
    rep_out["moduli_dimension"] = std::move(dj);
    rep_out["lambda"] = exponent_table_json(lambda);
    rep_out["lambda_class"] = lambda_class_json(classify_lambda(lambda, 1e-7));
    rep_out["rh"] = rh_json(rh);
    rep_out["checks"] = checks.json();
    return checks.pass() ? kExitPass : kExitCheckFailed;
}

int dispatch(const Instance& inst, const Options& o, Json& rep) {
    if (o.command == "monodromy") return cmd_monodromy(inst, o, rep);
    if (o.command == "stability") return cmd_stability(inst, o, rep);
    if (o.command == "transform") return cmd_transform(inst, o, rep);
    if (o.command == "flow") return cmd_flow(inst, o, rep);
    return cmd_verify(inst, o, rep);
}

void print_summary(const Json& rep, std::ostream& out) {
    out << rep["command"].get<std::string>() << ": " << rep["status"].get<std::string>() << "\n";
    if (rep.contains("checks"))
        for (const auto& c : rep["checks"]) out << "  " << c["name"].get<std::string>() << ": " << c["status"].get<std::string>() << "\n";
    if (rep.contains("verdict")) out << "  verdict: " << rep["verdict"].get<std::string>() << "\n";
    if (rep.contains("moduli_dimension")) {
        out << "  moduli_dimension: " << rep["moduli_dimension"]["value"].get<long long>() << "\n";
        if (!rep["moduli_dimension"]["warning"].is_null())
            out << "  warning: " << rep["moduli_dimension"]["warning"].get<std::string>() << "\n";
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Isomonodromy lab: monodromy, stability, transforms and Schlesinger flows", "iml"};
    Options o;
    double tol = 0;
    std::string out_path;
    unsigned seed = 0;
    app.add_option("command", o.command, "monodromy | stability | transform | flow | verify")
        ->required()
        ->check(CLI::IsMember({"monodromy", "stability", "transform", "flow", "verify"}));
    app.add_option("instance", o.instance, "instance file (JSON)")->required();
    auto* tol_opt = app.add_option("--tol", tol, "tolerance of the command's main check")->check(CLI::PositiveNumber);
    auto* out_opt = app.add_option("--out", out_path, "write the report here (atomically) instead of stdout");
    auto* seed_opt = app.add_option("--seed", seed, "seed for randomized checks (overrides the instance)");
    app.set_version_flag("--version", kToolVersion);

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitPass;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return kExitPass;
    } catch (const CLI::ParseError& e) {
        err << "iml: " << e.what() << "\n" << app.help();
        return kExitValidation;
    }
    if (*tol_opt) o.tol = tol;
    if (*out_opt) o.out = out_path;
    if (*seed_opt) o.seed = seed;

    Json rep = header(o);
    int code = kExitPass;
    try {
        const auto inst = load_instance(o.instance);
        rep["instance"] = summary(inst);
        code = dispatch(inst, o, rep);
        rep["status"] = code == kExitPass ? "pass" : "fail";
    } catch (const Error& e) {
        code = is_validation_error(e.kind()) ? kExitValidation : kExitNumerical;
        rep["status"] = "error";
        Json ej;
        ej["kind"] = to_string(e.kind());
        ej["message"] = e.what();
        rep["error"] = std::move(ej);
        err << "iml: " << e.what() << "\n";
    } catch (const std::exception& e) {
        code = kExitNumerical;
        rep["status"] = "error";
        Json ej;
        ej["kind"] = "Internal";
        ej["message"] = e.what();
        rep["error"] = std::move(ej);
        err << "iml: " << e.what() << "\n";
    }
    rep["exit_code"] = code;

    const std::string text = dump_report(rep);
    if (o.out) {
        try {
            write_atomically(*o.out, text);
        } catch (const Error& e) {
            err << "iml: " << e.what() << "\n";
            return kExitValidation;
        }
        print_summary(rep, out);
    } else {
        out << text;
    }
    return code;
}

}  // namespace iml
