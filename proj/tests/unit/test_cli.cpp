#include <doctest.h>

#include <filesystem>

#include "iml/cli.hpp"
#include "support.hpp"

using namespace iml;
using namespace iml::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
    Json report() const { return Json::parse(out); }
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("iml_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string write(const std::string& name, const Json& doc) const {
        auto p = (path / name).string();
        std::ofstream(p) << doc.dump(2);
        return p;
    }
};

Json load(const std::string& name) { return Json::parse(slurp(fixture(name))); }

const Json* find_check(const Json& report, const std::string& name) {
    for (const auto& c : report["checks"])
        if (c["name"] == name) return &c;
    return nullptr;
}

}  // namespace

TEST_CASE("monodromy report") {
    auto r = run({"monodromy", fixture("generic_r2n4")});
    REQUIRE(r.code == kExitPass);
    auto rep = r.report();
    CHECK(rep["schema_version"] == 1);
    CHECK(rep["command"] == "monodromy");
    CHECK(rep["status"] == "pass");
    CHECK(rep["monodromy"]["matrices"].size() == 4);
    CHECK(find_check(rep, "relation") != nullptr);
}

TEST_CASE("reports are byte identical across runs and thread counts") {
    auto a = run({"monodromy", fixture("generic_r2n4")});
    setenv("IML_THREADS", "1", 1);
    auto b = run({"monodromy", fixture("generic_r2n4")});
    unsetenv("IML_THREADS");
    CHECK(a.out == b.out);
    auto s1 = run({"stability", fixture("split_alpha_a")});
    auto s2 = run({"stability", fixture("split_alpha_a")});
    CHECK(s1.out == s2.out);
}

TEST_CASE("floats print with 17 significant digits") {
    Json doc = Json::object();
    doc["x"] = 0.1;
    doc["y"] = 2.0;
    doc["z"] = -0.0;
    auto text = dump_report(doc);
    CHECK(text.find("0.10000000000000001") != std::string::npos);
    CHECK(text.find("2.0") != std::string::npos);
    CHECK(text.find("-0") == std::string::npos);
}

TEST_CASE("malformed residue shape is a validation error") {
    TempDir dir;
    Json doc = load("generic_r2n4");
    doc["residues"][0].erase(1);
    auto r = run({"monodromy", dir.write("bad.json", doc)});
    CHECK(r.code == kExitValidation);
    CHECK(r.report()["status"] == "error");
    CHECK(r.report()["error"]["kind"] == "InvalidInput");
}

TEST_CASE("unknown fields are rejected") {
    TempDir dir;
    Json doc = load("generic_r2n4");
    doc["colour"] = "blue";
    CHECK(run({"monodromy", dir.write("top.json", doc)}).code == kExitValidation);
    Json doc2 = load("generic_r2n4");
    doc2["tolerances"]["frobnication"] = 1e-3;
    CHECK(run({"monodromy", dir.write("tol.json", doc2)}).code == kExitValidation);
}

TEST_CASE("wrong schema version and missing file") {
    TempDir dir;
    Json doc = load("generic_r2n4");
    doc["schema_version"] = 99;
    CHECK(run({"monodromy", dir.write("v.json", doc)}).code == kExitValidation);
    CHECK(run({"monodromy", (dir.path / "nope.json").string()}).code == kExitValidation);
    CHECK(run({"frobnicate", fixture("generic_r2n4")}).code == kExitValidation);
}

TEST_CASE("declared degree must match") {
    TempDir dir;
    Json doc = load("split_alpha_a");
    doc["degree"] = 5;
    CHECK(run({"stability", dir.write("d.json", doc)}).code == kExitValidation);
}

TEST_CASE("collision exits with a validation error") {
    auto r = run({"flow", fixture("collision_r2n4")});
    CHECK(r.code == kExitValidation);
    CHECK(r.report()["error"]["kind"] == "ConfigurationCollision");
}

TEST_CASE("near pole without regularization is a numerical failure") {
    TempDir dir;
    Json doc = load("near_pole_r2n4");
    doc["options"]["regularize"] = false;
    auto r = run({"flow", dir.write("np.json", doc)});
    CHECK(r.code == kExitNumerical);
    CHECK(r.report()["error"]["kind"] == "ChartExit");
    CHECK(run({"flow", fixture("near_pole_r2n4")}).code == kExitPass);
}

TEST_CASE("corrupted exponents fail verification") {
    auto r = run({"verify", fixture("corrupted_lambda")});
    CHECK(r.code == kExitCheckFailed);
    auto rep = r.report();
    CHECK(rep["status"] == "fail");
    const Json* c = find_check(rep, "compatibility");
    REQUIRE(c != nullptr);
    CHECK((*c)["status"] == "fail");
}

TEST_CASE("verify prints the moduli dimension") {
    auto r4 = run({"verify", fixture("generic_r2n4")});
    CHECK(r4.code == kExitPass);
    CHECK(r4.report()["moduli_dimension"]["value"] == 2);
    auto r5 = run({"verify", fixture("generic_r2n5")});
    CHECK(r5.report()["moduli_dimension"]["value"] == 4);
    auto r3 = run({"verify", fixture("irreducible_r2n3")});
    CHECK(r3.report()["moduli_dimension"].contains("warning"));
}

TEST_CASE("empty script is the identity") {
    TempDir dir;
    Json doc = load("split_alpha_a");
    doc["script"] = "";
    auto r = run({"transform", dir.write("e.json", doc)});
    REQUIRE(r.code == kExitPass);
    auto out = r.report()["output_instance"];
    CHECK(out["lambda"] == doc["lambda"]);
    CHECK(out["residues"] == Json::parse(dump_report(doc["residues"])));
}

TEST_CASE("elm round trip is exact") {
    auto r = run({"transform", fixture("elm_roundtrip")});
    REQUIRE(r.code == kExitPass);
    auto rep = r.report();
    CHECK(rep["output_instance"]["lambda"] == load("elm_roundtrip")["lambda"]);
}

TEST_CASE("normalize script reaches the window") {
    auto r = run({"transform", fixture("normalize_r2n3")});
    REQUIRE(r.code == kExitPass);
    auto rep = r.report();
    const Json* w = find_check(rep, "normalized_window");
    REQUIRE(w != nullptr);
    CHECK((*w)["status"] == "pass");
    for (const auto& row : rep["output_instance"]["lambda"])
        for (const auto& e : row) {
            auto v = parse_rational(e.is_array() ? e[0].get<std::string>() : e.get<std::string>());
            CHECK(v >= 0);
            CHECK(v < 1);
        }
}

TEST_CASE("transform output is a loadable instance") {
    TempDir dir;
    Json doc = load("split_alpha_a");
    doc["script"] = "elm i=2 j=1; twist i=1 dir=-1; permute i=3 order=increasing";
    auto r = run({"transform", dir.write("s.json", doc)});
    REQUIRE(r.code == kExitPass);
    auto out = dir.write("out.json", r.report()["output_instance"]);
    CHECK(run({"monodromy", out}).code == kExitPass);

    doc["script"] = "elm i=9 j=1";
    CHECK(run({"transform", dir.write("bad.json", doc)}).code == kExitValidation);
    doc["script"] = "shuffle";
    CHECK(run({"transform", dir.write("bad2.json", doc)}).code == kExitValidation);
}

TEST_CASE("stability verdicts") {
    auto a = run({"stability", fixture("split_alpha_a")}).report();
    CHECK(a["verdict"] == "Unstable");
    auto b = run({"stability", fixture("split_alpha_b")}).report();
    CHECK(b["verdict"] == "Stable");
    auto c = run({"stability", fixture("rank4_r4n3")});
    CHECK(c.code == kExitPass);
    CHECK(c.report()["verdict"] == "Undecided");
}

TEST_CASE("--out writes atomically and leaves no temporary") {
    TempDir dir;
    auto target = (dir.path / "report.json").string();
    auto r = run({"monodromy", fixture("generic_r2n4"), "--out", target});
    CHECK(r.code == kExitPass);
    auto text = slurp(target);
    CHECK(Json::parse(text)["status"] == "pass");
    CHECK(r.out.find("\"schema_version\"") == std::string::npos);
    int files = 0;
    for (const auto& e : fs::directory_iterator(dir.path)) {
        (void)e;
        ++files;
    }
    CHECK(files == 1);
    CHECK(text == run({"monodromy", fixture("generic_r2n4")}).out);
}

TEST_CASE("--seed changes only the seeded checks") {
    auto a = run({"verify", fixture("generic_r2n4"), "--seed", "1"});
    auto b = run({"verify", fixture("generic_r2n4"), "--seed", "2"});
    auto c = run({"verify", fixture("generic_r2n4"), "--seed", "1"});
    CHECK(a.code == kExitPass);
    CHECK(b.code == kExitPass);
    CHECK(a.out == c.out);
    CHECK(a.out != b.out);
}

TEST_CASE("--tol overrides the check tolerance") {
    auto r = run({"flow", fixture("generic_r2n4"), "--tol", "1e-30"});
    CHECK(r.code == kExitCheckFailed);
    auto rep = r.report();
    const Json* iso = find_check(rep, "isomonodromy");
    REQUIRE(iso != nullptr);
    CHECK((*iso)["status"] == "fail");
    CHECK(run({"flow", fixture("generic_r2n4"), "--tol", "-1"}).code == kExitValidation);
}
