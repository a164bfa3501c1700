#include "iml/instance.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

namespace iml {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::InvalidInput, where + ": " + what);
}

void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) bad(where, "expected an object");
    for (const auto& item : obj.items())
        if (!allowed.count(item.key())) bad(where, "unknown field '" + item.key() + "'");
}

const Json& array_at(const Json& j, const std::string& where, std::size_t expected = 0) {
    if (!j.is_array()) bad(where, "expected an array");
    if (expected && j.size() != expected)
        bad(where, "expected " + std::to_string(expected) + " entries, got " + std::to_string(j.size()));
    return j;
}

Rational rational_of(const Json& j, const std::string& where) {
    try {
        if (j.is_string()) return parse_rational(j.get<std::string>());
        // JSON numbers are read through their decimal text so 0.1 stays 1/10
        if (j.is_number()) return parse_rational(j.dump());
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        bad(where, e.what());
    }
    bad(where, "expected a rational string or number");
}

double real_of(const Json& j, const std::string& where) {
    if (j.is_number()) {
        double v = j.get<double>();
        if (!std::isfinite(v)) bad(where, "non-finite number");
        return v;
    }
    if (j.is_string()) return to_double(rational_of(j, where));
    bad(where, "expected a number");
}

Complex complex_of(const Json& j, const std::string& where) {
    if (j.is_number() || j.is_string()) return {real_of(j, where), 0.0};
    array_at(j, where, 2);
    return {real_of(j[0], where + "[0]"), real_of(j[1], where + "[1]")};
}

CMatrix matrix_of(const Json& j, int r, const std::string& where) {
    array_at(j, where, static_cast<std::size_t>(r));
    CMatrix m(r, r);
    for (int a = 0; a < r; ++a) {
        std::string row = where + "[" + std::to_string(a) + "]";
        array_at(j[a], row, static_cast<std::size_t>(r));
        for (int b = 0; b < r; ++b) m(a, b) = complex_of(j[a][b], row + "[" + std::to_string(b) + "]");
    }
    return m;
}

Exponent exponent_of(const Json& j, const std::string& where) {
    if (j.is_string()) return Exponent(ExactScalar(rational_of(j, where)));
    if (j.is_number()) return Exponent(Complex(real_of(j, where), 0.0));
    array_at(j, where, 2);
    if (j[0].is_string() && j[1].is_string())
        return Exponent(ExactScalar(rational_of(j[0], where), rational_of(j[1], where)));
    return Exponent(complex_of(j, where));
}

long long integer_of(const Json& j, const std::string& where) {
    if (!j.is_number_integer()) bad(where, "expected an integer");
    return j.get<long long>();
}

double positive_of(const Json& j, const std::string& where) {
    double v = real_of(j, where);
    if (!(v > 0)) bad(where, "expected a positive number");
    return v;
}

void parse_tolerances(const Json& j, Tolerances& t) {
    static const std::set<std::string> keys = {"transport",    "relation",  "rh",          "compatibility",
                                               "flow",         "conservation", "spectrum", "isomonodromy",
                                               "invariant",    "reducibility", "oracle"};
    reject_unknown(j, keys, "tolerances");
    auto get = [&](const char* key, double& slot) {
        if (j.contains(key)) slot = positive_of(j[key], std::string("tolerances.") + key);
    };
    get("transport", t.transport);
    get("relation", t.relation);
    get("rh", t.rh);
    get("compatibility", t.compatibility);
    get("flow", t.flow);
    get("conservation", t.conservation);
    get("spectrum", t.spectrum);
    get("isomonodromy", t.isomonodromy);
    get("invariant", t.invariant);
    get("reducibility", t.reducibility);
    get("oracle", t.oracle);
}

void parse_options(const Json& j, InstanceOptions& o) {
    reject_unknown(j, {"regularize", "blowup", "word_budget", "oracle_steps"}, "options");
    if (j.contains("regularize")) {
        if (!j["regularize"].is_boolean()) bad("options.regularize", "expected a boolean");
        o.regularize = j["regularize"].get<bool>();
    }
    if (j.contains("blowup")) o.blowup = positive_of(j["blowup"], "options.blowup");
    if (j.contains("word_budget")) {
        long long w = integer_of(j["word_budget"], "options.word_budget");
        if (w < 1 || w > 6) bad("options.word_budget", "must lie in 1..6");
        o.word_budget = static_cast<int>(w);
    }
    if (j.contains("oracle_steps")) {
        long long s = integer_of(j["oracle_steps"], "options.oracle_steps");
        if (s < 1) bad("options.oracle_steps", "must be positive");
        o.oracle_steps = s;
    }
}

SubbundleCandidate candidate_of(const Json& j, int r, std::size_t n, const std::string& where) {
    reject_unknown(j, {"label", "rank", "degree", "jumps"}, where);
    for (const char* key : {"rank", "degree", "jumps"})
        if (!j.contains(key)) bad(where, std::string("missing '") + key + "'");
    SubbundleCandidate c;
    c.rank = static_cast<int>(integer_of(j["rank"], where + ".rank"));
    c.degree = integer_of(j["degree"], where + ".degree");
    if (j.contains("label")) {
        if (!j["label"].is_string()) bad(where + ".label", "expected a string");
        c.label = j["label"].get<std::string>();
    }
    array_at(j["jumps"], where + ".jumps", n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string w = where + ".jumps[" + std::to_string(i) + "]";
        array_at(j["jumps"][i], w, static_cast<std::size_t>(r));
        std::vector<int> row;
        for (const auto& v : j["jumps"][i]) row.push_back(static_cast<int>(integer_of(v, w)));
        c.jumps.push_back(std::move(row));
    }
    return c;
}

}  // namespace

MarkedSphere Instance::sphere() const { return MarkedSphere(punctures, basepoint, include_infinity); }

FuchsianSystem Instance::system() const { return FuchsianSystem(sphere(), residues, tolerances.compatibility); }

ExponentData Instance::exponents() const { return lambda ? *lambda : exponents_from_spectra(residues); }

ParabolicConnection Instance::connection() const {
    return make_connection(system(), exponents(), flags, std::max(tolerances.compatibility, 1e-9));
}

Instance parse_instance(const Json& doc) {
    static const std::set<std::string> keys = {
        "schema_version", "description", "rank",    "punctures", "include_infinity", "basepoint",
        "residues",       "lambda",      "weights", "degree",    "flags",            "tolerances",
        "options",        "path",        "seed",    "script",    "candidates",       "transform_log"};
    reject_unknown(doc, keys, "instance");
    for (const char* key : {"schema_version", "rank", "punctures", "basepoint", "residues"})
        if (!doc.contains(key)) bad("instance", std::string("missing required field '") + key + "'");

    if (!doc["schema_version"].is_number_integer() || doc["schema_version"].get<long long>() != kSchemaVersion)
        bad("schema_version", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");

    Instance inst;
    long long r = integer_of(doc["rank"], "rank");
    if (r < 1 || r > 16) bad("rank", "must lie in 1..16");
    inst.rank = static_cast<int>(r);
    if (doc.contains("description")) {
        if (!doc["description"].is_string()) bad("description", "expected a string");
        inst.description = doc["description"].get<std::string>();
    }

    array_at(doc["punctures"], "punctures");
    for (std::size_t i = 0; i < doc["punctures"].size(); ++i)
        inst.punctures.push_back(complex_of(doc["punctures"][i], "punctures[" + std::to_string(i) + "]"));
    const std::size_t n = inst.punctures.size();
    if (n == 0) bad("punctures", "at least one puncture is required");
    if (doc.contains("include_infinity")) {
        if (!doc["include_infinity"].is_boolean()) bad("include_infinity", "expected a boolean");
        inst.include_infinity = doc["include_infinity"].get<bool>();
    }
    inst.basepoint = complex_of(doc["basepoint"], "basepoint");

    array_at(doc["residues"], "residues", n);
    for (std::size_t i = 0; i < n; ++i)
        inst.residues.push_back(matrix_of(doc["residues"][i], inst.rank, "residues[" + std::to_string(i) + "]"));

    if (doc.contains("tolerances")) parse_tolerances(doc["tolerances"], inst.tolerances);
    if (doc.contains("options")) parse_options(doc["options"], inst.options);

    if (doc.contains("lambda")) {
        array_at(doc["lambda"], "lambda", n);
        ExponentTable rows;
        for (std::size_t i = 0; i < n; ++i) {
            std::string w = "lambda[" + std::to_string(i) + "]";
            array_at(doc["lambda"][i], w, static_cast<std::size_t>(r));
            std::vector<Exponent> row;
            for (std::size_t k = 0; k < doc["lambda"][i].size(); ++k)
                row.push_back(exponent_of(doc["lambda"][i][k], w + "[" + std::to_string(k) + "]"));
            rows.push_back(std::move(row));
        }
        inst.lambda.emplace(std::move(rows), 1e-7);
    }
    if (doc.contains("degree")) {
        inst.degree = integer_of(doc["degree"], "degree");
        if (*inst.degree != inst.exponents().degree())
            bad("degree", "declared degree " + std::to_string(*inst.degree) + " differs from -sum(lambda) = " +
                              std::to_string(inst.exponents().degree()));
    }

    if (doc.contains("weights")) {
        array_at(doc["weights"], "weights", n);
        std::vector<std::vector<Rational>> alpha;
        for (std::size_t i = 0; i < n; ++i) {
            std::string w = "weights[" + std::to_string(i) + "]";
            array_at(doc["weights"][i], w, static_cast<std::size_t>(r));
            std::vector<Rational> row;
            for (const auto& v : doc["weights"][i]) row.push_back(rational_of(v, w));
            alpha.push_back(std::move(row));
        }
        inst.weights.emplace(std::move(alpha));
    }

    if (doc.contains("flags")) {
        array_at(doc["flags"], "flags", n);
        std::vector<Flag> flags;
        for (std::size_t i = 0; i < n; ++i)
            flags.emplace_back(matrix_of(doc["flags"][i], inst.rank, "flags[" + std::to_string(i) + "]"));
        inst.flags = std::move(flags);
    }

    if (doc.contains("path")) {
        array_at(doc["path"], "path");
        DeformationPath path;
        for (std::size_t k = 0; k < doc["path"].size(); ++k) {
            std::string w = "path[" + std::to_string(k) + "]";
            array_at(doc["path"][k], w, n);
            Configuration c;
            for (std::size_t i = 0; i < n; ++i) c.push_back(complex_of(doc["path"][k][i], w));
            path.samples.push_back(std::move(c));
        }
        if (path.samples.size() < 2) bad("path", "needs at least two configurations");
        inst.path = std::move(path);
    }

    if (doc.contains("seed")) {
        long long s = integer_of(doc["seed"], "seed");
        if (s < 0 || s > 0xffffffffLL) bad("seed", "must be a 32-bit unsigned integer");
        inst.seed = static_cast<unsigned>(s);
    }
    if (doc.contains("script")) {
        if (!doc["script"].is_string()) bad("script", "expected a string");
        inst.script = doc["script"].get<std::string>();
    }
    if (doc.contains("candidates")) {
        array_at(doc["candidates"], "candidates");
        for (std::size_t k = 0; k < doc["candidates"].size(); ++k)
            inst.candidates.push_back(
                candidate_of(doc["candidates"][k], inst.rank, n, "candidates[" + std::to_string(k) + "]"));
    }
    if (doc.contains("transform_log")) {
        array_at(doc["transform_log"], "transform_log");
        inst.transform_log = doc["transform_log"];
    }

    // type invariants: separation, residue sum, exponent shape
    inst.system();
    if (inst.lambda && inst.lambda->rank() != inst.rank) bad("lambda", "row length differs from rank");
    if (inst.weights && inst.weights->rank() != inst.rank) bad("weights", "row length differs from rank");
    return inst;
}

Instance load_instance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::InvalidInput, "cannot open instance file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    Json doc;
    try {
        doc = Json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidInput, std::string("malformed JSON: ") + e.what());
    }
    return parse_instance(doc);
}

// ---------------------------------------------------------------- serialization

Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Json matrix_json(const CMatrix& m) {
    Json rows = Json::array();
    for (Eigen::Index a = 0; a < m.rows(); ++a) {
        Json row = Json::array();
        for (Eigen::Index b = 0; b < m.cols(); ++b) row.push_back(complex_json(m(a, b)));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json rational_json(const Rational& q) { return to_string(q); }

Json exponent_json(const Exponent& e) {
    if (e.exact) {
        if (e.exact->im == 0) return to_string(e.exact->re);
        return Json::array({to_string(e.exact->re), to_string(e.exact->im)});
    }
    return complex_json(e.value);
}

Json exponent_table_json(const ExponentData& lambda) {
    Json rows = Json::array();
    for (const auto& row : lambda.rows()) {
        Json out = Json::array();
        for (const auto& e : row) out.push_back(exponent_json(e));
        rows.push_back(std::move(out));
    }
    return rows;
}

Json record_json(const TransformRecord& rec) {
    Json j;
    j["kind"] = to_string(rec.kind);
    j["puncture"] = rec.puncture >= 0 ? Json(rec.puncture + 1) : Json(nullptr);
    if (rec.kind == TransformRecord::Kind::Elm) j["j"] = rec.j;
    if (rec.kind == TransformRecord::Kind::TwistB) j["direction"] = rec.direction;
    j["gauge"] = rec.gauge;
    Json before = Json::array(), after = Json::array();
    for (const auto& e : rec.before) before.push_back(exponent_json(e));
    for (const auto& e : rec.after) after.push_back(exponent_json(e));
    j["before"] = std::move(before);
    j["after"] = std::move(after);
    j["degree_delta"] = rec.degree_delta;
    j["notes"] = rec.notes;
    return j;
}

Json instance_json(const Instance& base, const ParabolicConnection& conn) {
    const auto& sys = conn.system;
    Json j;
    j["schema_version"] = kSchemaVersion;
    if (!base.description.empty()) j["description"] = base.description;
    j["rank"] = sys.rank();
    Json punct = Json::array();
    for (Complex t : sys.sphere().punctures()) punct.push_back(complex_json(t));
    j["punctures"] = std::move(punct);
    j["include_infinity"] = sys.sphere().include_infinity();
    j["basepoint"] = complex_json(sys.sphere().basepoint());
    Json res = Json::array();
    for (const auto& a : sys.residues()) res.push_back(matrix_json(a));
    j["residues"] = std::move(res);
    j["lambda"] = exponent_table_json(conn.exponents);
    j["degree"] = conn.exponents.degree();
    Json flags = Json::array();
    for (const auto& f : conn.flags) flags.push_back(matrix_json(f.basis()));
    j["flags"] = std::move(flags);
    if (base.weights) {
        Json w = Json::array();
        for (const auto& row : base.weights->alpha()) {
            Json out = Json::array();
            for (const auto& q : row) out.push_back(rational_json(q));
            w.push_back(std::move(out));
        }
        j["weights"] = std::move(w);
    }
    Json log = base.transform_log;
    for (const auto& rec : conn.provenance) log.push_back(record_json(rec));
    j["transform_log"] = std::move(log);
    return j;
}

namespace {

void emit(const Json& j, std::string& out, int depth) {
    auto indent = [&](int d) { out.append(static_cast<std::size_t>(2 * d), ' '); };
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) { out += "{}"; return; }
            out += "{\n";
            bool first = true;
            for (const auto& item : j.items()) {
                if (!first) out += ",\n";
                first = false;
                indent(depth + 1);
                out += Json(item.key()).dump();
                out += ": ";
                emit(item.value(), out, depth + 1);
            }
            out += "\n";
            indent(depth);
            out += "}";
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) { out += "[]"; return; }
            // arrays of scalars stay on one line
            bool flat = true;
            for (const auto& v : j)
                if (v.is_structured() && !(v.is_array() && v.size() <= 2 && !v.empty() && v[0].is_primitive())) {
                    flat = false;
                    break;
                }
            if (flat) {
                out += "[";
                for (std::size_t k = 0; k < j.size(); ++k) {
                    if (k) out += ", ";
                    emit(j[k], out, depth);
                }
                out += "]";
                return;
            }
            out += "[\n";
            for (std::size_t k = 0; k < j.size(); ++k) {
                if (k) out += ",\n";
                indent(depth + 1);
                emit(j[k], out, depth + 1);
            }
            out += "\n";
            indent(depth);
            out += "]";
            return;
        }
        case Json::value_t::number_float: {
            double v = j.get<double>();
            if (std::isnan(v)) { out += "\"nan\""; return; }
            if (std::isinf(v)) { out += v > 0 ? "\"inf\"" : "\"-inf\""; return; }
            if (v == 0.0) v = 0.0;  // drop the sign of negative zero
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            std::string s = buf;
            if (s.find_first_of(".eE") == std::string::npos) s += ".0";
            out += s;
            return;
        }
        default:
            out += j.dump();
    }
}

}  // namespace

std::string dump_report(const Json& doc) {
    std::string out;
    emit(doc, out, 0);
    out += "\n";
    return out;
}

void write_atomically(const std::string& path, const std::string& text) {
    std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(ErrorKind::InvalidInput, "cannot write '" + tmp + "'");
        f << text;
        f.flush();
        if (!f) {
            std::remove(tmp.c_str());
            throw Error(ErrorKind::InvalidInput, "write failed for '" + tmp + "'");
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw Error(ErrorKind::InvalidInput, "cannot rename into '" + path + "'");
    }
}

}  // namespace iml
