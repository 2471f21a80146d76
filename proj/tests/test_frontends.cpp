#include "scribprop/cli.hpp"
#include "scribprop/eval.hpp"
#include "scribprop/service.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <filesystem>
#include <sstream>

using namespace scribprop;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "scribprop");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("scribprop_front_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SynthSample sample(std::uint64_t seed, double noise = 0.0) {
  SynthSpec spec;
  spec.seed = seed;
  spec.noise_std = noise;
  return generate_synthetic(spec);
}

}  // namespace

TEST_CASE("cli superpixels") {
  const auto dir = temp_dir("sp");
  RgbImage img(16, 16);
  std::fill(img.data.begin(), img.data.end(), 90);
  save_image(img, dir / "u.png");
  const auto r = cli({"superpixels", (dir / "u.png").string(), "-o", (dir / "ids.png").string()});
  CHECK(r.code == 0);
  CHECK(r.out == "count: 1\n");
  CHECK(fs::exists(dir / "ids_overlay.png"));
  CHECK(cli({"superpixels", (dir / "missing.png").string(), "-o", (dir / "x.png").string()}).code == kExitIo);
  CHECK(cli({"superpixels", (dir / "u.png").string(), "-o", (dir / "x.png").string(), "--k", "0"}).code ==
        kExitConfig);
}

TEST_CASE("cli help and unknown flags") {
  for (const char* sub : {"superpixels", "propagate", "train", "infer", "eval", "synth", "gen", "serve"}) {
    CHECK(cli({sub, "--help"}).code == 0);
    CHECK(cli({sub, "--no-such-flag"}).code == kExitConfig);
  }
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
}

TEST_CASE("cli propagate, eval and synth") {
  const auto dir = temp_dir("prop");
  const SynthSample s = sample(1);
  save_image(s.image, dir / "img.png");
  save_scribbles(s.scribbles, dir / "scr.json");
  save_labelmap(s.ground_truth, dir / "gt.png");

  const auto img = (dir / "img.png").string(), scr = (dir / "scr.json").string();
  REQUIRE(cli({"propagate", img, scr, "-o", (dir / "a.png").string()}).code == 0);
  REQUIRE(cli({"propagate", img, scr, "-o", (dir / "b.png").string(), "--stats", (dir / "b.json").string()}).code == 0);
  CHECK(read_file(dir / "a.png") == read_file(dir / "b.png"));
  const auto stats = nlohmann::json::parse(read_file(dir / "stats.json"));
  CHECK(stats.contains("energy"));

  // Same as the trainer's first iteration.
  TrainConfig cfg;
  CHECK(load_labelmap(dir / "a.png") == propagate_image(s.image, s.scribbles, nullptr, cfg).labels);

  const auto ev = cli({"eval", (dir / "gt.png").string(), (dir / "gt.png").string()});
  CHECK(ev.code == 0);
  CHECK(ev.out == "miou: 1\n");

  REQUIRE(cli({"synth", scr, "-o", (dir / "spots.json").string(), "--ratio", "0"}).code == 0);
  for (const auto& sc : load_scribbles(dir / "spots.json").scribbles) CHECK(sc.polyline.size() == 1);
  CHECK(cli({"synth", scr, "-o", (dir / "x.json").string(), "--ratio", "2"}).code == kExitConfig);

  // Config file with flag override.
  write_file(dir / "cfg.ini", "[propagate]\nlambda=0\n");
  REQUIRE(cli({"--config", (dir / "cfg.ini").string(), "propagate", img, scr, "-o", (dir / "c.png").string(),
               "--stats", (dir / "c.json").string()})
              .code == 0);
  REQUIRE(cli({"propagate", img, scr, "-o", (dir / "d.png").string(), "--stats", (dir / "d.json").string(),
               "--lambda", "0"})
              .code == 0);
  CHECK(read_file(dir / "c.json") == read_file(dir / "d.json"));
  REQUIRE(cli({"--config", (dir / "cfg.ini").string(), "propagate", img, scr, "-o", (dir / "e.png").string(),
               "--stats", (dir / "e.json").string(), "--lambda", "1"})
              .code == 0);
  CHECK(read_file(dir / "e.json") == read_file(dir / "b.json"));
}

TEST_CASE("cli propagate exit codes") {
  const auto dir = temp_dir("codes");
  RgbImage img(8, 8);
  save_image(img, dir / "img.png");
  ScribbleSet scr{"img.png", 8, 8, {{1, {{0, 0}}, 0}, {2, {{0, 0}}, 0}}};
  save_scribbles(scr, dir / "scr.json");
  // Uniform image: the single superpixel touched by both categories may take either.
  const auto r = cli({"propagate", (dir / "img.png").string(), (dir / "scr.json").string(), "-o",
                      (dir / "o.png").string()});
  CHECK(r.code == 0);
  const auto label = load_labelmap(dir / "o.png").labels.front();
  CHECK((label == 1 || label == 2));
  CHECK(cli({"propagate", (dir / "img.png").string(), (dir / "nope.json").string(), "-o", (dir / "o.png").string()})
            .code == kExitIo);
  CHECK(cli({"propagate", (dir / "img.png").string(), (dir / "scr.json").string(), "-o", (dir / "o.png").string(),
             "--predictor", "weird"})
            .code == kExitConfig);
}

TEST_CASE("cli gen, train and infer") {
  const auto dir = temp_dir("train");
  REQUIRE(cli({"gen", "-o", (dir / "data").string(), "--count", "3", "--noise", "5"}).code == 0);
  CHECK(fs::exists(dir / "data" / "index.json"));
  CHECK(fs::exists(dir / "data" / "manifest.json"));
  CHECK(fs::exists(dir / "data" / "gt" / "0002.png"));
  REQUIRE(cli({"train", (dir / "data" / "index.json").string(), "-o", (dir / "ck").string()}).code == 0);
  for (int it = 0; it < 3; ++it) {
    const auto iter = dir / "ck" / ("iter" + std::to_string(it));
    CHECK(fs::exists(iter / "model.json"));
    CHECK(fs::exists(iter / "stats.json"));
    CHECK(fs::exists(iter / "labels" / "0000.png"));
  }
  CHECK(!fs::exists(dir / "ck" / "iter3"));
  CHECK(TrainConfig{}.outer_iterations == 3);
  REQUIRE(cli({"infer", (dir / "ck" / "model.json").string(), (dir / "data" / "images" / "0001.png").string(), "-o",
               (dir / "pred.png").string()})
              .code == 0);
  const auto ev = cli({"eval", (dir / "pred.png").string(), (dir / "data" / "gt" / "0001.png").string(), "--stats",
                       (dir / "ev.json").string()});
  CHECK(ev.code == 0);
  CHECK(nlohmann::json::parse(read_file(dir / "ev.json")).contains("miou"));

  // Predictor propagation through the trained model.
  CHECK(cli({"propagate", (dir / "data" / "images" / "0001.png").string(),
             (dir / "data" / "scribbles" / "0001.json").string(), "-o", (dir / "mp.png").string(), "--predictor",
             "model:" + (dir / "ck" / "model.json").string()})
            .code == 0);
}

TEST_CASE("service endpoints") {
  const auto dir = temp_dir("svc");
  ServiceConfig cfg;
  SessionService service(cfg);
  const int port = service.start_background();
  httplib::Client client("127.0.0.1", port);

  const SynthSample s = sample(4);
  const std::string png = encode_png(s.image);

  auto created = client.Post("/sessions", png, "image/png");
  REQUIRE(created);
  CHECK(created->status == 201);
  CHECK(created->get_header_value("Access-Control-Allow-Origin") == "*");
  const auto info = nlohmann::json::parse(created->body);
  const std::string id = info["id"];
  CHECK(info["width"] == s.image.width);
  CHECK(info["superpixel_count"] == segment_fh(s.image).count);
  const std::string base = "/sessions/" + id;

  CHECK(client.Post("/sessions", std::string("garbage"), "image/png")->status == 400);
  // Oversize header is refused before decoding.
  CHECK(client.Post("/sessions", encode_png(RgbImage(4097, 1)), "image/png")->status == 413);

  CHECK(client.Get(base + "/labels.png")->status == 409);
  CHECK(client.Post(base + "/propagate", "{}", "application/json")->status == 409);
  CHECK(client.Get(base + "/superpixels.png")->status == 200);

  const std::string text = serialize_scribbles(s.scribbles);
  auto put = client.Put(base + "/scribbles", text, "application/json");
  CHECK(put->status == 200);
  CHECK(nlohmann::json::parse(put->body)["revision"] == 1);
  CHECK(nlohmann::json::parse(client.Put(base + "/scribbles", text, "application/json")->body)["revision"] == 2);
  CHECK(client.Get(base + "/scribbles")->body == text);

  std::string oob_text = serialize_scribbles(ScribbleSet{"", s.image.width, s.image.height, {}});
  oob_text.replace(oob_text.find("[]"), 2, R"([{"category":1,"polyline":[[999,0]],"brush_radius":0}])");
  CHECK(client.Put(base + "/scribbles", oob_text, "application/json")->status == 422);
  CHECK(client.Put("/sessions/nope/scribbles", text, "application/json")->status == 404);

  auto prop = client.Post(base + "/propagate", R"({"use_pairwise":true,"predictor":"none","lambda":1})",
                          "application/json");
  REQUIRE(prop->status == 200);
  const auto pj = nlohmann::json::parse(prop->body);
  CHECK(pj["revision"] == 2);
  CHECK(pj["labels_url"] == base + "/labels.png");
  const std::string labels = client.Get(base + "/labels.png")->body;
  auto again = client.Post(base + "/propagate", R"({"use_pairwise":true,"predictor":"none","lambda":1})",
                           "application/json");
  CHECK(nlohmann::json::parse(again->body)["energy"] == pj["energy"]);
  CHECK(client.Get(base + "/labels.png")->body == labels);
  CHECK(client.Post(base + "/propagate", R"({"predictor":"model"})", "application/json")->status == 400);

  // Same result as the CLI on the same inputs.
  save_image(s.image, dir / "img.png");
  write_file(dir / "scr.json", text);
  REQUIRE(cli({"propagate", (dir / "img.png").string(), (dir / "scr.json").string(), "-o", (dir / "l.png").string()})
              .code == 0);
  CHECK(read_file(dir / "l.png") == labels);
  const auto stats = nlohmann::json::parse(read_file(dir / "stats.json"));
  CHECK(stats["energy"].get<double>() == pj["energy"].get<double>());

  auto opt = client.Options(base + "/propagate");
  CHECK(opt->status == 204);

  CHECK(client.Delete(base)->status == 204);
  CHECK(client.Get(base + "/scribbles")->status == 404);
  CHECK(client.Delete(base)->status == 404);

  // Session from a server-side path, whole image scribbled with one category.
  nlohmann::json body;
  body["path"] = (dir / "img.png").string();
  auto byp = client.Post("/sessions", body.dump(), "application/json");
  REQUIRE(byp->status == 201);
  const std::string id2 = nlohmann::json::parse(byp->body)["id"];
  ScribbleSet cover{"", s.image.width, s.image.height, {{9, {{0, 0}}, 500}}};
  client.Put("/sessions/" + id2 + "/scribbles", serialize_scribbles(cover), "application/json");
  REQUIRE(client.Post("/sessions/" + id2 + "/propagate", "{}", "application/json")->status == 200);
  for (auto v : decode_labelmap_png(client.Get("/sessions/" + id2 + "/labels.png")->body).labels) CHECK(v == 9);
  CHECK(service.session_count() == 1);
  service.stop();
}

TEST_CASE("service expires idle sessions") {
  ServiceConfig cfg;
  cfg.idle_ttl = std::chrono::seconds(0);
  SessionService service(cfg);
  const int port = service.start_background();
  httplib::Client client("127.0.0.1", port);
  RgbImage img(8, 8);
  REQUIRE(client.Post("/sessions", encode_png(img), "image/png")->status == 201);
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  CHECK(service.expire_idle() == 1);
  CHECK(service.session_count() == 0);
}
