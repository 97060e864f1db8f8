#include <doctest.h>

#include <filesystem>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "herdpipe/error.hpp"
#include "herdpipe/io/convert.hpp"
#include "herdpipe/io/formats.hpp"
#include "support/roundtrip.hpp"

using namespace herdpipe;
using namespace herdpipe::io;
namespace fs = std::filesystem;

namespace {

const ClassSet kClasses({"Camel", "Mask", "Pole", "Rope"});

Dataset one_image(BBox box, ClassId cls = 0) {
  Dataset ds;
  ds.manifest.classes = kClasses;
  ds.manifest.records.push_back({"f1", "frames/f1.png", 100, 100, Split::kTrain, Source::kHuman});
  ds.images.push_back({"f1", 100, 100, {{box, cls}}, {}, {}});
  return ds;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("herdpipe_io_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("yolo examples") {
  AnnotatedImage full{"a", 100, 100, {{{0, 0, 100, 100}, 0}}, {}, {}};
  CHECK(write_yolo_txt(full) == "0 0.500000 0.500000 1.000000 1.000000\n");
  AnnotatedImage small{"b", 100, 50, {{{10, 15, 30, 35}, 2}}, {}, {}};
  CHECK(write_yolo_txt(small) == "2 0.200000 0.500000 0.200000 0.400000\n");
  CHECK(write_yolo_txt({"c", 10, 10, {}, {}, {}}).empty());

  CHECK_THROWS_AS(write_yolo_txt({"d", 10, 10, {{{0, 0, 11, 5}, 0}}, {}, {}}), ContractError);
  CHECK_THROWS_AS(parse_yolo_txt("0 0.5 0.5 1.0\n", 10, 10, kClasses), ParseError);
  CHECK_THROWS_AS(parse_yolo_txt("7 0.5 0.5 0.2 0.2\n", 10, 10, kClasses), ParseError);
  CHECK_THROWS_AS(parse_yolo_txt("0 0.5 0.5 1.2 0.2\n", 10, 10, kClasses), ParseError);
  CHECK_THROWS_AS(parse_yolo_txt("0 0.9 0.5 0.4 0.2\n", 10, 10, kClasses), ParseError);
  CHECK_THROWS_AS(parse_yolo_txt("x 0.5 0.5 0.2 0.2\n", 10, 10, kClasses), ParseError);
  try {
    parse_yolo_txt("0 0.5 0.5 0.2 0.2\n0 nan 0.5 0.2 0.2\n", 10, 10, kClasses);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  const auto img = parse_yolo_txt("1 0.5 0.5 0.2 0.4\r\n", 100, 100, kClasses);
  REQUIRE(img.boxes.size() == 1);
  CHECK(img.boxes[0].class_id == 1);
  CHECK(img.boxes[0].bbox.x_min == doctest::Approx(40));
  CHECK(img.boxes[0].bbox.y_max == doctest::Approx(70));
}

TEST_CASE("coco examples") {
  Dataset empty;
  const auto doc = nlohmann::json::parse(write_coco_json(empty));
  CHECK(doc["images"].empty());
  CHECK(doc["annotations"].empty());
  CHECK(doc["categories"].empty());
  CHECK(parse_coco_json(write_coco_json(empty)) == empty);

  const auto one = nlohmann::json::parse(write_coco_json(one_image({10, 20, 30, 60}, 1)));
  CHECK(one["annotations"][0]["bbox"] == nlohmann::json({10, 20, 20, 40}));
  CHECK(one["annotations"][0]["category_id"] == 2);
  CHECK(one["annotations"][0]["area"] == 800);
  CHECK(one["images"][0]["image_key"] == "f1");

  CHECK_THROWS_AS(parse_coco_json("{"), ParseError);
  CHECK_THROWS_AS(parse_coco_json(R"({"images":[],"categories":[]})"), ParseError);
  CHECK_THROWS_AS(
      parse_coco_json(R"({"images":[],"categories":[{"id":1,"name":"a"}],
        "annotations":[{"id":1,"image_id":9,"category_id":1,"bbox":[0,0,1,1]}]})"),
      ParseError);
  CHECK_THROWS_AS(
      parse_coco_json(R"({"images":[{"id":1,"file_name":"x.png","width":4,"height":4}],
        "categories":[{"id":1,"name":"a"}],
        "annotations":[{"id":1,"image_id":1,"category_id":1,"bbox":[0,0,9,1]}]})"),
      ParseError);
  const auto plain = parse_coco_json(R"({"images":[{"id":7,"file_name":"dir/x.png","width":4,"height":4}],
        "categories":[{"id":3,"name":"b"},{"id":1,"name":"a"}],
        "annotations":[{"id":1,"image_id":7,"category_id":3,"bbox":[0,0,2,1]}]})");
  CHECK(plain.images[0].id == "x");
  CHECK(plain.manifest.classes.names() == std::vector<std::string>{"a", "b"});
  CHECK(plain.images[0].boxes[0].class_id == 1);
}

TEST_CASE("coco rle is column-major on the wire") {
  Dataset ds = one_image({0, 0, 2, 2});
  ds.manifest.records[0].width = ds.images[0].width = 3;
  ds.manifest.records[0].height = ds.images[0].height = 2;
  // Row-major 3x2 raster: 1 1 0 / 0 0 0  -> runs {0,2,4}.
  ds.images[0].masks.push_back({0, 3, 2, RunLength{{0, 2, 4}}});
  const auto doc = nlohmann::json::parse(write_coco_json(ds));
  // Column-major: 1 0 | 1 0 | 0 0
  CHECK(doc["annotations"][0]["segmentation"]["counts"] == nlohmann::json({0, 1, 1, 1, 3}));
  CHECK(doc["annotations"][0]["segmentation"]["size"] == nlohmann::json({2, 3}));
  CHECK(parse_coco_json(doc.dump()) == ds);
}

TEST_CASE("voc examples") {
  const AnnotatedImage img{"f1", 100, 80, {{{0, 0, 10, 10}, 0}}, {}, {}};
  const auto xml = write_voc_xml(img, kClasses, "f1.png");
  CHECK(xml.find("<xmin>1</xmin>") != std::string::npos);
  CHECK(xml.find("<ymin>1</ymin>") != std::string::npos);
  CHECK(xml.find("<xmax>10</xmax>") != std::string::npos);
  CHECK(xml.find("<ymax>10</ymax>") != std::string::npos);
  CHECK(xml.find("<depth>3</depth>") != std::string::npos);
  CHECK(parse_voc_xml(xml, kClasses) == img);

  CHECK_THROWS_AS(parse_voc_xml("<annotation><filename>a.png</filename></annotation>", kClasses),
                  ParseError);
  CHECK_THROWS_AS(parse_voc_xml("<annotation><size>", kClasses), ParseError);
  const std::string unknown =
      "<annotation><size><width>10</width><height>10</height></size><object><name>Goat</name>"
      "<bndbox><xmin>1</xmin><ymin>1</ymin><xmax>2</xmax><ymax>2</ymax></bndbox></object></annotation>";
  try {
    parse_voc_xml(unknown, kClasses);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find("Camel, Mask, Pole, Rope") != std::string::npos);
  }
  const ClassSet odd({"a & <b>"});
  const AnnotatedImage escaped{"e", 5, 5, {{{1, 1, 3, 3}, 0}}, {}, {}};
  CHECK(parse_voc_xml(write_voc_xml(escaped, odd, "e.jpg"), odd) == escaped);
}

TEST_CASE("csv examples") {
  Dataset empty;
  CHECK(write_csv(empty) == "image_id,class,x_min,y_min,x_max,y_max,confidence,split\n");

  const auto ds = one_image({1.5, 2, 3, 4}, 3);
  const auto text = write_csv(ds);
  CHECK(text ==
        "image_id,class,x_min,y_min,x_max,y_max,confidence,split\n"
        "f1,Rope,1.5,2,3,4,,train\n");
  CHECK(parse_csv(text, ds.manifest) == ds);

  Dataset scored = ds;
  scored.images[0].scores = {0.25};
  CHECK(write_csv(scored).find(",0.25,train\n") != std::string::npos);

  const std::string head = "image_id,class,x_min,y_min,x_max,y_max,confidence,split\n";
  CHECK_THROWS_AS(parse_csv(head + "f1,Goat,1,1,2,2,,train\n", ds.manifest), ParseError);
  CHECK_THROWS_AS(parse_csv(head + "f1,Rope,1,1,2,2,,valid\n", ds.manifest), ParseError);
  CHECK_THROWS_AS(parse_csv(head + "zz,Rope,1,1,2,2,,train\n", ds.manifest), ParseError);
  CHECK_THROWS_AS(parse_csv(head + "f1,Rope,1,1,2,2,0.5,train\nf1,Rope,1,1,2,2,,train\n", ds.manifest),
                  ParseError);
  CHECK_THROWS_AS(parse_csv("a,b\n", ds.manifest), ParseError);
}

TEST_CASE("manifest validation") {
  auto ds = one_image({0, 0, 1, 1});
  CHECK_NOTHROW(ds.validate());
  ds.manifest.records[0].path = "../escape.png";
  CHECK_THROWS_AS(ds.manifest.validate(), DatasetError);
  ds.manifest.records[0].path = "/abs.png";
  CHECK_THROWS_AS(ds.manifest.validate(), DatasetError);
  ds.manifest.records[0].path = "ok.png";
  ds.manifest.records[0].id = "a/b";
  CHECK_THROWS_AS(ds.manifest.validate(), DatasetError);
  ds = one_image({0, 0, 1, 1});
  ds.manifest.records.push_back(ds.manifest.records[0]);
  CHECK_THROWS_AS(ds.manifest.validate(), DatasetError);

  const auto m = one_image({0, 0, 1, 1}).manifest;
  CHECK(manifest_from_json(nlohmann::json::parse(to_json(m).dump())) == m);
  CHECK_THROWS_AS(manifest_from_json(nlohmann::json::parse(R"({"classes":["a"],"images":[
      {"id":"x","path":"x.png","width":1,"height":1,"split":"holdout","source":"human"}]})")),
                  ParseError);
}

TEST_CASE("format round trips over random datasets") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    testdata::DatasetOptions opt;
    opt.masks = i % 2 == 0;
    opt.scores = i % 3 == 0;
    auto ds = testdata::random_dataset(rng, opt);
    CHECK(testdata::check_coco(ds) == "");
    CHECK(testdata::check_csv(ds) == "");
    CHECK(testdata::check_yolo(ds) == "");
    CHECK(testdata::check_voc(ds) == "");
  }
}

TEST_CASE("convert between on-disk layouts") {
  const auto dir = scratch("convert");
  std::mt19937_64 rng(5);
  testdata::DatasetOptions opt;
  opt.masks = true;
  Dataset ds;
  while (ds.images.empty()) ds = testdata::random_dataset(rng, opt);
  std::size_t masks = 0;
  for (auto& img : ds.images) masks += img.masks.size();

  write_dataset(ds, dir / "in.json", Format::kCocoJson);
  const auto to_yolo = convert(dir / "in.json", Format::kCocoJson, dir / "yolo", Format::kYoloTxt);
  CHECK(to_yolo.masks_dropped == masks);
  CHECK(to_yolo.describe().find(fmt::format("masks dropped: {}", masks)) != std::string::npos);
  CHECK(fs::exists(dir / "yolo" / "data.yaml"));
  CHECK(fs::exists(dir / "yolo" / "classes.txt"));

  convert(dir / "yolo", Format::kYoloTxt, dir / "back.json", Format::kCocoJson);
  const auto back = read_dataset(dir / "back.json", Format::kCocoJson);
  CHECK(back.manifest == ds.manifest);
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    CHECK(back.images[i].masks.empty());
    CHECK(testdata::boxes_close(ds.images[i], back.images[i],
                                testdata::yolo_tolerance(ds.images[i].width, ds.images[i].height)));
  }

  convert(dir / "in.json", Format::kCocoJson, dir / "voc", Format::kVocXml);
  const auto voc = read_dataset(dir / "voc", Format::kVocXml);
  CHECK(voc.manifest == ds.manifest);

  convert(dir / "in.json", Format::kCocoJson, dir / "csv" / "boxes.csv", Format::kCsv);
  const auto csv = read_dataset(dir / "csv" / "boxes.csv", Format::kCsv);
  CHECK(csv.images.size() == ds.images.size());

  CHECK_THROWS_AS(parse_format("pascal"), ConfigError);
  CHECK(parse_format("yolo-txt") == Format::kYoloTxt);
  CHECK_THROWS_AS(read_dataset(dir / "missing.json", Format::kCocoJson), IoError);
  CHECK_THROWS_AS(read_dataset(dir / "nowhere", Format::kYoloTxt), IoError);
  fs::remove_all(dir);
}
