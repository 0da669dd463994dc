#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "bigtan/scene.hpp"

using namespace bigtan;

namespace {

const std::string kScenes = BIGTAN_SCENE_DIR;

std::string scene(const std::string& name) { return kScenes + "/" + name; }

int cli(const std::string& args) {
  const std::string cmd = std::string(BIGTAN_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const Check* find_check(const nlohmann::ordered_json& run, const std::string& suite, const std::string& name) {
  static Check c;
  for (const auto& s : run["suites"])
    if (s["suite"] == suite)
      for (const auto& k : s["checks"])
        if (k["identity_name"] == name) {
          c.name = name;
          c.pass = k["pass"].get<bool>();
          c.max_residual = k["max_residual"].is_null() ? NAN : k["max_residual"].get<double>();
          return &c;
        }
  return nullptr;
}

}  // namespace

TEST(Scene, MinimalFlatSceneLoads) {
  const SceneFile s = parse_scene("[scene]\nm = 1\n");
  EXPECT_EQ(s.m, 1);
  EXPECT_FALSE(s.base_metric);
  EXPECT_EQ(default_suites(s), (std::vector<std::string>{"canonical", "triple", "integrability", "connections"}));
}

TEST(Scene, YIndexOutOfRangeIsAnErrorWithLocation) {
  try {
    parse_scene("[scene]\nm = 1\n[lagrangian]\nL = 0.5*y2^2\n", "t.scene");
    FAIL() << "expected an error";
  } catch (const SceneError& e) {
    EXPECT_NE(std::string(e.what()).find("t.scene:4"), std::string::npos) << e.what();
  }
}

TEST(Scene, ComponentIndexOutOfRange) {
  EXPECT_THROW(parse_scene("[scene]\nm = 2\n[base_metric]\ng[1,3] = 1\n"), SceneError);
  EXPECT_THROW(parse_scene("[scene]\nm = 2\n[base_metric]\ng[1] = 1\n"), SceneError);
}

TEST(Scene, StructuralErrors) {
  EXPECT_THROW(parse_scene("[scene]\n"), SceneError);
  EXPECT_THROW(parse_scene("m = 1\n"), SceneError);
  EXPECT_THROW(parse_scene("[scene]\nm = 1\n[nowhere]\n"), SceneError);
  EXPECT_THROW(parse_scene("[scene]\nm = 1\nm = 1\n"), SceneError);
  EXPECT_THROW(parse_scene("[scene]\nm = 7\n"), SceneError);
  EXPECT_THROW(parse_scene("[scene]\nm = 1\nsuites = metric\n"), SceneError);
  EXPECT_THROW(parse_scene("[scene]\nm = 1\n[box]\nlo = 0\n"), SceneError);
  EXPECT_THROW(parse_scene("[scene]\nm = 1\n[double_field]\npsi[1,1] = 0\n"), SceneError);
}

TEST(Scene, PairCompletion) {
  const SceneFile s = parse_scene(
      "[scene]\nm = 2\n[base_metric]\ng[1,1] = 1\ng[1,2] = x1\ng[2,2] = 2\n"
      "[double_field]\nsigma[1,1] = 1\nsigma[2,2] = 1\npsi[1,2] = y1\n");
  EXPECT_EQ((*s.base_metric)[2], "x1");
  EXPECT_EQ(s.double_field->psi[2], "-(y1)");
  EXPECT_EQ(s.double_field->psi[1], "y1");
}

TEST(Scene, KitchenSinkReferencesEverySection) {
  const SceneFile s = load_scene(scene("kitchen-sink.scene"));
  EXPECT_EQ(s.m, 2);
  EXPECT_TRUE(s.base_metric && s.lagrangian && s.double_field && s.box);
  EXPECT_EQ(s.vector_fields.count("X"), 1u);
  EXPECT_EQ(default_suites(s).size(), suite_names().size());
}

TEST(Run, FlatSceneAllSuitesPass) {
  const RunResult r = run_suites(load_scene(scene("flat.scene")));
  EXPECT_TRUE(r.pass) << r.json.dump(2);
}

TEST(Run, PerturbedSFailsWithNamedIdentity) {
  const RunResult r = run_suites(load_scene(scene("perturbed-S.scene")));
  EXPECT_FALSE(r.pass);
  const Check* c = find_check(r.json, "triple", "sharp_Q flat_P S = -S");
  ASSERT_NE(c, nullptr);
  EXPECT_FALSE(c->pass);
}

TEST(Run, ToleranceOverrideRejudges) {
  const SceneFile bad = load_scene(scene("perturbed-S.scene"));
  EXPECT_FALSE(run_suites(bad).pass);
  // the perturbation has size 0.3
  EXPECT_TRUE(find_check(run_suites(bad, {{}, {}, {}, 10.0}).json, "triple", "sharp_Q flat_P S = -S")->pass);
  const RunResult tight = run_suites(load_scene(scene("flat.scene")), {{"canonical"}, {}, 2, 1e-300});
  for (const auto& c : tight.json["suites"][0]["checks"])
    if (c["tol"].get<double>() > 0) {
      EXPECT_EQ(c["tol"].get<double>(), 1e-300);
    }
}

TEST(Run, UnknownSuiteIsInputError) {
  EXPECT_THROW(run_suites(parse_scene("[scene]\nm = 1\n"), {{"nope"}, {}, {}, {}}), SceneError);
  EXPECT_THROW(run_suites(parse_scene("[scene]\nm = 1\n"), {{"metric"}, {}, {}, {}}), SceneError);
}

TEST(Eval, PoissonBivectorIsCanonical) {
  const SceneFile s = parse_scene("[scene]\nm = 2\n");
  const auto j = eval_object(s, "P", parse_point("x=0.1,0.2;y=0.3,0.4;z=0.5,0.6", 2));
  const auto c = j["components"].get<std::vector<double>>();
  const TensorValue ref = canonical_pack(2).P.value(ChartPoint({0, 0}, {0, 0}, {0, 0}));
  ASSERT_EQ(c.size(), ref.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i], ref.flat(i));
  EXPECT_EQ(ref(2, 4), 1.0);
  EXPECT_EQ(ref(4, 2), -1.0);
}

TEST(Eval, FreeSprayIsZero) {
  const SceneFile s = parse_scene("[scene]\nm = 2\n[lagrangian]\nL = 0.5*(y1^2 + y2^2)\n");
  const auto j = eval_object(s, "spray.eta", parse_point("x=0.3,-0.2;y=0.7,0.1", 2));
  for (double v : j["components"].get<std::vector<double>>()) EXPECT_EQ(v, 0.0);
}

TEST(Eval, RhoMatchesLibraryCall) {
  const SceneFile s = load_scene(scene("kitchen-sink.scene"));
  const ChartPoint p = parse_point("x=0.1,0.2;y=0.3,-0.1;z=0.2,0.4", 2);
  const double v = eval_object(s, "dfield.rho", p)["components"][0].get<double>();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(v, scalar_curvature(scene_double_field(s), p));
}

TEST(Eval, ErrorsAndMetadata) {
  const SceneFile s = load_scene(scene("kitchen-sink.scene"));
  const ChartPoint p = parse_point("x=0.1,0.2", 2);
  EXPECT_THROW(eval_object(s, "nothing", p), SceneError);
  EXPECT_THROW(eval_object(s, "complete_lift.Y", p), SceneError);
  EXPECT_THROW(parse_point("x=0.1", 2), SceneError);
  EXPECT_THROW(parse_point("w=0.1,0.2", 2), SceneError);
  const auto j = eval_object(s, "dfield.G", p);
  EXPECT_EQ(j["shape"], (nlohmann::ordered_json{4, 4}));
  EXPECT_EQ(eval_object(s, "complete_lift.X", p)["signature"], (nlohmann::ordered_json{"up"}));
  for (const auto& name : object_names()) {
    if (name.find('<') != std::string::npos) continue;
    EXPECT_NO_THROW(eval_object(s, name, p)) << name;
  }
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("version"), 0);
  EXPECT_EQ(cli("check " + scene("flat.scene")), 0);
  EXPECT_EQ(cli("check " + scene("perturbed-S.scene")), 1);
  EXPECT_EQ(cli("check /nonexistent.scene"), 2);
  EXPECT_EQ(cli("check " + scene("flat.scene") + " --suite bogus"), 2);
  EXPECT_EQ(cli("eval " + scene("flat.scene") + " --object P --point 'x=1,2'"), 2);
  EXPECT_EQ(cli("eval " + scene("flat.scene") + " --object P --point 'x=1'"), 0);
  EXPECT_EQ(cli(""), 2);
}

TEST(Cli, ReportIsDeterministic) {
  const std::string dir = ::testing::TempDir();
  const std::string a = dir + "/bigtan_a.json", b = dir + "/bigtan_b.json";
  ASSERT_EQ(cli("check " + scene("flat.scene") + " --seed 9 --json " + a), 0);
  ASSERT_EQ(cli("check " + scene("flat.scene") + " --seed 9 --json " + b), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  const auto j = nlohmann::ordered_json::parse(slurp(a));
  EXPECT_EQ(j["seed"], 9);
  for (const auto& s : j["suites"])
    for (const auto& c : s["checks"])
      for (const char* key : {"identity_name", "max_residual", "tol", "pass"}) EXPECT_TRUE(c.contains(key));
}
