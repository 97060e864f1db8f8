#include <cmath>
#include <filesystem>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>

#include "herdpipe/error.hpp"
#include "herdpipe/io/formats.hpp"
#include "text_util.hpp"

namespace herdpipe::io {

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

double number_at(const boost::property_tree::ptree& node, const std::string& path,
                 std::string_view where) {
  const auto text = node.get_optional<std::string>(path);
  if (!text) throw ParseError(fmt::format("VOC XML: {} lacks <{}>", where, path));
  std::string trimmed = *text;
  trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
  trimmed.erase(trimmed.find_last_not_of(" \t\r\n") + 1);
  const auto v = detail::parse_double(trimmed);
  if (!v) throw ParseError(fmt::format("VOC XML: <{}> in {} is not a number: '{}'", path, where, *text));
  return *v;
}

}  // namespace

std::string write_voc_xml(const AnnotatedImage& image, const ClassSet& classes,
                          std::string_view filename) {
  validate(image, classes);
  std::string out = "<annotation>\n";
  out += fmt::format("\t<filename>{}</filename>\n", xml_escape(filename));
  out += fmt::format("\t<size>\n\t\t<width>{}</width>\n\t\t<height>{}</height>\n\t\t<depth>3</depth>\n\t</size>\n",
                     image.width, image.height);
  for (const auto& gt : image.boxes) {
    const auto& b = gt.bbox;
    out += "\t<object>\n";
    out += fmt::format("\t\t<name>{}</name>\n", xml_escape(classes.name(gt.class_id)));
    out += "\t\t<difficult>0</difficult>\n";
    out += fmt::format(
        "\t\t<bndbox>\n\t\t\t<xmin>{}</xmin>\n\t\t\t<ymin>{}</ymin>\n\t\t\t<xmax>{}</xmax>\n\t\t\t<ymax>{}</ymax>\n\t\t</bndbox>\n",
        std::lround(b.x_min) + 1, std::lround(b.y_min) + 1, std::lround(b.x_max), std::lround(b.y_max));
    out += "\t</object>\n";
  }
  out += "</annotation>\n";
  return out;
}

AnnotatedImage parse_voc_xml(std::string_view text, const ClassSet& classes) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string("VOC XML: ") + e.what());
  }
  const auto root = tree.get_child_optional("annotation");
  if (!root) throw ParseError("VOC XML: missing <annotation> root");
  const auto size = root->get_child_optional("size");
  if (!size) throw ParseError("VOC XML: missing <size> element");

  AnnotatedImage img;
  const auto filename = root->get_optional<std::string>("filename");
  if (filename) img.id = std::filesystem::path(*filename).stem().string();
  const double w = number_at(*size, "width", "<size>");
  const double h = number_at(*size, "height", "<size>");
  if (w <= 0 || h <= 0 || w != std::floor(w) || h != std::floor(h)) {
    throw ParseError("VOC XML: <size> needs positive integer width and height");
  }
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);

  int index = 0;
  for (const auto& [tag, obj] : *root) {
    if (tag != "object") continue;
    ++index;
    const auto where = fmt::format("<object> #{}", index);
    const auto name = obj.get_optional<std::string>("name");
    if (!name) throw ParseError(fmt::format("VOC XML: {} lacks <name>", where));
    const ClassId cls = classes.id_of(*name);
    const auto bnd = obj.get_child_optional("bndbox");
    if (!bnd) throw ParseError(fmt::format("VOC XML: {} lacks <bndbox>", where));
    const BBox box{number_at(*bnd, "xmin", where) - 1.0, number_at(*bnd, "ymin", where) - 1.0,
                   number_at(*bnd, "xmax", where), number_at(*bnd, "ymax", where)};
    if (!is_valid(box) || box.x_max > img.width || box.y_max > img.height) {
      throw ParseError(fmt::format("VOC XML: {} bndbox ({}, {}, {}, {}) is outside the {}x{} image",
                                   where, box.x_min + 1, box.y_min + 1, box.x_max, box.y_max,
                                   img.width, img.height));
    }
    img.boxes.push_back({box, cls});
  }
  return img;
}

}  // namespace herdpipe::io
