#include "commands.h"

#include "lumisplat/cli/pipeline.h"

#include <CLI11.hpp>

#include <iostream>

using namespace lumisplat;
using namespace lumisplat::cli;

namespace {

void sceneOptions(CLI::App* c, SceneArgs& a) {
  c->add_option("--character", a.character, "character directory")->required();
  c->add_option("--pose", a.pose, "pose JSON")->required();
  c->add_option("--view", a.view, "camera JSON")->required();
  c->add_option("--deform", a.deform, "deformation JSON");
  c->add_option("--env", a.env, "environment map (PFM/HDR/PNG)");
  c->add_option("--rig", a.rig, "light rig JSON");
  c->add_option("--config", a.config, "run configuration");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Egocentric character relighting pipeline"};
  app.set_version_flag("--version", versionString());
  app.require_subcommand(1);

  SolveIkArgs ik;
  auto* cIk = app.add_subcommand("solve-ik", "fit skeleton motion to 3-D keypoints");
  cIk->add_option("--character", ik.character)->required();
  cIk->add_option("--keypoints", ik.keypoints, "JSON-lines keypoints")->required();
  cIk->add_option("--out", ik.out, "motion JSON-lines")->required();
  cIk->add_option("--config", ik.config, "IK stage configuration");
  cIk->add_option("--hand-pca", ik.handPca);
  cIk->add_option("--truth", ik.truth, "ground-truth motion; prints MP-JPE");

  FitDeformArgs fd;
  auto* cFd = app.add_subcommand("fit-deform", "fit the embedded deformation to stereo depth");
  cFd->add_option("--character", fd.character)->required();
  cFd->add_option("--pose", fd.pose)->required();
  cFd->add_option("--depth-left", fd.depthLeft, "PFM with a .json sidecar")->required();
  cFd->add_option("--depth-right", fd.depthRight)->required();
  cFd->add_option("--out", fd.out)->required();
  cFd->add_option("--init", fd.init, "starting deformation");
  cFd->add_option("--config", fd.config);

  TraceArgs tr;
  auto* cTr = app.add_subcommand("trace-features", "visibility and per-texel transport features");
  sceneOptions(cTr, tr);
  cTr->add_option("--out", tr.out)->required();

  RelightArgs rl;
  auto* cRl = app.add_subcommand("relight", "render the character under a rig or environment");
  sceneOptions(cRl, rl);
  cRl->add_option("--splats", rl.splats, "splat texture (.lspt)");
  cRl->add_option("--out", rl.out)->required();

  RenderArgs rd;
  auto* cRd = app.add_subcommand("render", "splat the albedo without lighting");
  cRd->add_option("--character", rd.character)->required();
  cRd->add_option("--pose", rd.pose)->required();
  cRd->add_option("--splats", rd.splats)->required();
  cRd->add_option("--view", rd.view)->required();
  cRd->add_option("--out", rd.out)->required();
  cRd->add_option("--deform", rd.deform);
  cRd->add_option("--config", rd.config);

  CalibrateArgs ce;
  auto* cCe = app.add_subcommand("calibrate-env", "recover the panorama colour model from ego views");
  cCe->add_option("--panorama", ce.panorama)->required();
  cCe->add_option("--obs", ce.obs, "observation directory")->required();
  cCe->add_option("--character", ce.character)->required();
  cCe->add_option("--out-env", ce.outEnv)->required();
  cCe->add_option("--out-cc", ce.outCc)->required();
  cCe->add_option("--init-cc", ce.init);
  cCe->add_option("--config", ce.config);

  MetricsArgs mt;
  auto* cMt = app.add_subcommand("metrics", "PSNR and SSIM between two images");
  cMt->add_option("a", mt.a)->required();
  cMt->add_option("b", mt.b)->required();
  cMt->add_option("--out", mt.out, "JSON report");
  cMt->add_option("--peak", mt.peak, "signal peak")->check(CLI::PositiveNumber);

  DemoArgs dm;
  auto* cDm = app.add_subcommand("make-demo", "write a self-contained synthetic dataset");
  cDm->add_option("--out", dm.out)->required();
  cDm->add_option("--seed", dm.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*cIk) solveIk(ik);
    if (*cFd) fitDeform(fd);
    if (*cTr) traceFeatures(tr);
    if (*cRl) relight(rl);
    if (*cRd) render(rd);
    if (*cCe) calibrateEnv(ce);
    if (*cMt) metrics(mt);
    if (*cDm) makeDemo(dm);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  if (warningCount() > 0) std::cerr << warningCount() << " warning(s)\n";
  return 0;
}
