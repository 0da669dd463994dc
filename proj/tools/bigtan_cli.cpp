#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bigtan/scene.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kInputError = 2;

int run_check(const std::string& scene_path, const bigtan::RunOptions& opts, const std::string& json_path) {
  const bigtan::SceneFile scene = bigtan::load_scene(scene_path);
  const bigtan::RunResult res = bigtan::run_suites(scene, opts);
  const std::string text = res.json.dump(2) + "\n";
  if (json_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw bigtan::SceneError(json_path + ": cannot write");
    out << text;
  }
  for (const auto& suite : res.json["suites"])
    for (const auto& c : suite["checks"])
      if (!c["pass"].get<bool>())
        std::cerr << "FAIL " << suite["suite"].get<std::string>() << ": " << c["identity_name"].get<std::string>()
                  << "\n";
  if (!json_path.empty()) std::cout << (res.pass ? "PASS" : "FAIL") << " " << scene_path << "\n";
  return res.pass ? kPass : kFail;
}

int run_eval(const std::string& scene_path, const std::string& object, const std::string& point) {
  const bigtan::SceneFile scene = bigtan::load_scene(scene_path);
  const bigtan::ChartPoint p = bigtan::parse_point(point, scene.m);
  std::cout << bigtan::eval_object(scene, object, p).dump(2) << "\n";
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Big-tangent manifold geometry: identity checks and point evaluation"};
  app.require_subcommand(1);

  std::string scene_path, json_path, object, point;
  std::vector<std::string> suites;
  bigtan::RunOptions opts;
  std::uint64_t seed = 0;
  int samples = 0;
  double tol = 0.0;

  auto* check = app.add_subcommand("check", "Run verification suites on a scene");
  check->add_option("scene", scene_path, "Scene file")->required();
  check->add_option("--suite", suites, "Suite to run (repeatable)")
      ->check(CLI::IsMember(bigtan::suite_names()));
  auto* seed_opt = check->add_option("--seed", seed, "Sampling seed");
  auto* samples_opt = check->add_option("--samples", samples, "Points per suite")->check(CLI::Range(1, 100000));
  auto* tol_opt = check->add_option("--tol", tol, "Tolerance for every residual check")->check(CLI::PositiveNumber);
  check->add_option("--json", json_path, "Write the JSON report here instead of stdout");

  auto* eval = app.add_subcommand("eval", "Evaluate a named object at a point");
  eval->add_option("scene", scene_path, "Scene file")->required();
  eval->add_option("--object", object, "Object name")->required();
  eval->add_option("--point", point, "Point as \"x=...;y=...;z=...\"")->required();

  auto* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kInputError;
  }

  try {
    if (*version) {
      std::cout << "bigtan " << bigtan::kVersion << "\n";
      return kPass;
    }
    if (*check) {
      opts.suites = suites;
      if (*seed_opt) opts.seed = seed;
      if (*samples_opt) opts.samples = samples;
      if (*tol_opt) opts.tol = tol;
      return run_check(scene_path, opts, json_path);
    }
    return run_eval(scene_path, object, point);
  } catch (const bigtan::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
}
