#include "teb/scenario.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace teb;

namespace {

std::string
slurp(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ScenarioInvalid("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int
cmdRun(const std::string& file, uint64_t seed, bool seedSet, const std::string& outDir)
{
  Scenario sc;
  try {
    sc = loadScenarioFile(file);
  }
  catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  if (seedSet)
    sc.seed = seed;

  Network net;
  ScenarioResult result;
  try {
    result = runScenario(sc, net);
  }
  catch (const Error& e) {
    std::cerr << "run aborted: " << e.what() << "\n";
    return 1;
  }

  std::cout << "scenario " << sc.name << " (" << sc.protocol << ", seed " << sc.seed << ")\n";
  for (const auto& s : result.sessions) {
    std::cout << "  session " << s.entity << ": ";
    if (s.completed) {
      std::cout << "completed, order " << s.order;
      for (const auto& n : s.names)
        std::cout << " " << n;
    }
    else {
      std::cout << "stopped at " << s.failedAt << " (" << s.error << ")";
    }
    std::cout << "\n";
  }
  for (const auto& a : result.actions)
    std::cout << "  " << a.op << ": " << (a.ok ? "ok" : "FAILED") << ", " << a.detail << "\n";
  for (const auto& v : result.violations)
    std::cout << "  violation: " << v << "\n";
  std::cout << (result.ok ? "ok" : "FAILED") << " (" << net.transcript().events().size()
            << " transcript events)\n";

  if (!outDir.empty()) {
    std::filesystem::create_directories(outDir);
    std::ofstream(outDir + "/transcript.jsonl") << net.transcript().toJsonl();
    std::ofstream(outDir + "/report.json") << reportJson(sc, result, net).dump(2) << "\n";
  }
  return result.ok ? 0 : 1;
}

int
cmdSchemaCheck(const std::string& file)
{
  try {
    TrustSchema schema = parseSchema(slurp(file));
    std::cout << file << ": " << schema.rules().size() << " rules, anchor #"
              << schema.anchorRule() << "\n";
    for (const auto& r : schema.rules()) {
      std::cout << "  #" << r.id;
      if (r.signer)
        std::cout << " <= #" << *r.signer;
      std::cout << "\n";
    }
    return 0;
  }
  catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}

int
cmdSchemaExpand(const std::string& tmpl, const std::string& zone)
{
  if (tmpl != "minimal-trust-zone") {
    std::cerr << "unknown template '" << tmpl << "'\n";
    return 2;
  }
  std::cout << toText(minimalTrustZone(zone));
  return 0;
}

} // namespace

int
main(int argc, char** argv)
{
  CLI::App app{"trust-domain entity bootstrapping toolkit"};
  app.require_subcommand(1);

  std::string runFile, outDir;
  uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "run a scenario file and report the outcome");
  run->add_option("file", runFile, "scenario JSON file")->required();
  auto* seedOpt = run->add_option("--seed", seed, "override the scenario's RNG seed");
  run->add_option("--out", outDir, "directory for report.json and transcript.jsonl");

  auto* schema = app.add_subcommand("schema", "trust schema utilities");
  schema->require_subcommand(1);
  std::string checkFile;
  auto* check = schema->add_subcommand("check", "parse a schema file and list its rules");
  check->add_option("file", checkFile, "schema text file")->required();
  std::string tmpl = "minimal-trust-zone", zone;
  auto* expand = schema->add_subcommand("expand", "print a generated schema");
  expand->add_option("--template", tmpl, "template name");
  expand->add_option("zone", zone, "zone name component")->required();

  auto* orderings = app.add_subcommand("orderings", "list the admissible procedure orderings");

  try {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run->parsed())
    return cmdRun(runFile, seed, seedOpt->count() > 0, outDir);
  if (check->parsed())
    return cmdSchemaCheck(checkFile);
  if (expand->parsed())
    return cmdSchemaExpand(tmpl, zone);
  if (orderings->parsed()) {
    for (const auto& o : validOrderings())
      std::cout << orderString(o) << "\n";
    return 0;
  }
  return 2;
}
