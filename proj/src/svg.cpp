#include "dke/svg.hpp"

#include "dke/training.hpp"

#include <cstdio>
#include <sstream>

namespace dke {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void ring(std::ostringstream& os, const Points& pts, const char* stroke, const char* fill, double width) {
  os << "<polygon points=\"";
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    if (i > 0) os << ' ';
    os << num(pts(i, 0)) << ',' << num(pts(i, 1));
  }
  os << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"/>\n";
}

void dots(std::ostringstream& os, const Points& pts, const char* color) {
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    os << "<circle cx=\"" << num(pts(i, 0)) << "\" cy=\"" << num(pts(i, 1)) << "\" r=\"1.2\" fill=\"" << color
       << "\"/>\n";
}

}  // namespace

std::string render_svg(const SvgScene& scene) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << scene.width << "\" height=\"" << scene.height
     << "\" viewBox=\"0 0 " << scene.width << ' ' << scene.height << "\">\n";
  os << "<defs><marker id=\"head\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" orient=\"auto\">"
        "<path d=\"M0,0 L6,3 L0,6 z\" fill=\"#d33\"/></marker></defs>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#222\"/>\n";
  os << "<g id=\"ground-truth\">\n";
  for (const Polygon& p : scene.ground_truth) ring(os, p.vertices(), "#ffffff", "none", 1.0);
  os << "</g>\n<g id=\"kernel\">\n";
  for (const Contour& c : scene.kernels) ring(os, c.points, "#3399ff", "none", 1.0);
  os << "</g>\n<g id=\"labeled\">\n";
  for (const Contour& c : scene.labeled) dots(os, c.points, "#ffd700");
  os << "</g>\n<g id=\"predicted\">\n";
  for (const Contour& c : scene.predicted) {
    ring(os, c.points, "#33cc33", "none", 1.0);
    dots(os, c.points, "#33cc33");
  }
  os << "</g>\n<g id=\"arrows\" stroke=\"#d33\" stroke-width=\"0.6\">\n";
  for (const Arrow& a : scene.arrows) {
    os << "<line x1=\"" << num(a.from.x()) << "\" y1=\"" << num(a.from.y()) << "\" x2=\"" << num(a.to.x())
       << "\" y2=\"" << num(a.to.y()) << "\" marker-end=\"url(#head)\"/>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

SvgScene visualize_scene(const SynthScene& scene, const DeformNet& net, LossKind kind, int n_vertices,
                         int iterations, double feature_scale) {
  SvgScene out;
  out.width = scene.width;
  out.height = scene.height;
  out.ground_truth = scene.boundaries();
  const SurrogateFeatureField field = make_feature_field(scene.width, scene.height, out.ground_truth, feature_scale);
  for (const TextInstance& inst : scene.instances) {
    const Contour kernel = sample_and_sort(inst.kernel, n_vertices);
    const Contour pred = deform_contour(net, kernel, field, iterations);
    const Contour target = sample_and_sort(inst.boundary, n_vertices);
    const std::vector<int> pairing = match_vertices(kind, pred, target);
    for (std::size_t i = 0; i < pairing.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      out.arrows.push_back({pred.points.row(row).transpose(), target.points.row(pairing[i]).transpose()});
    }
    out.kernels.push_back(kernel);
    out.predicted.push_back(pred);
    out.labeled.push_back(target);
  }
  return out;
}

}  // namespace dke
