#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iml/schlesinger.hpp"

namespace iml {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct Tolerances {
    double transport = kTransportTol;  // integrator step tolerance for monodromy
    double relation = 1e-8;            // |prod M - I|
    double rh = 1e-6;                  // char-poly coefficient agreement
    double compatibility = 1e-9;
    double flow = 1e-12;               // integrator step tolerance for the Schlesinger flow
    double conservation = 1e-9;
    double spectrum = 1e-8;
    double isomonodromy = 1e-6;
    double invariant = 1e-8;           // trace-word agreement under transforms
    double reducibility = 1e-7;
    double oracle = 1e-4;
};

struct InstanceOptions {
    bool regularize = false;
    double blowup = 1e6;
    int word_budget = 3;
    long long oracle_steps = 100000;
};

/// Parsed instance file.  Exponents default to the residue spectra.
struct Instance {
    int rank = 0;
    std::vector<Complex> punctures;
    Complex basepoint;
    bool include_infinity = false;
    std::vector<CMatrix> residues;
    std::optional<ExponentData> lambda;
    std::optional<Weights> weights;
    std::optional<long long> degree;
    Tolerances tolerances;
    InstanceOptions options;
    std::optional<DeformationPath> path;
    unsigned seed = 0;
    std::string script;
    std::string description;
    std::vector<SubbundleCandidate> candidates;
    std::optional<std::vector<Flag>> flags;
    Json transform_log = Json::array();

    MarkedSphere sphere() const;
    FuchsianSystem system() const;
    ExponentData exponents() const;
    /// Validated connection (flags from the file or built from the exponents).
    ParabolicConnection connection() const;
};

Instance parse_instance(const Json& doc);
Instance load_instance(const std::string& path);

/// Instance document for a connection (used for transform outputs).
Json instance_json(const Instance& base, const ParabolicConnection& conn);

// serialization helpers shared with the reports
Json complex_json(Complex z);
Json matrix_json(const CMatrix& m);
Json exponent_json(const Exponent& e);
Json rational_json(const Rational& q);
Json record_json(const TransformRecord& rec);
Json exponent_table_json(const ExponentData& lambda);

/// Fixed-order JSON text with every float printed to 17 significant digits.
std::string dump_report(const Json& doc);

/// Writes through a temporary file and renames it into place.
void write_atomically(const std::string& path, const std::string& text);

}  // namespace iml
