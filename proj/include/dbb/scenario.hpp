#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbb/arrivals.hpp"
#include "dbb/csv.hpp"
#include "dbb/detectors.hpp"
#include "dbb/errors.hpp"
#include "dbb/fields.hpp"
#include "dbb/guidance.hpp"
#include "dbb/povm.hpp"

namespace dbb {

using json = nlohmann::json;

inline constexpr int kScenarioSchemaVersion = 1;

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

namespace sj {

inline const json& require(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key))
    throw SchemaError(ctx + ": missing required field '" + key + "'");
  return j.at(key);
}

inline double number(const json& j, const std::string& key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (!v.is_number()) throw SchemaError(ctx + "." + key + ": expected a number");
  return v.get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw SchemaError(key + ": expected a number");
  return j.at(key).get<double>();
}

inline std::uint64_t integer_or(const json& j, const std::string& key,
                                std::uint64_t fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw SchemaError(key + ": expected an integer");
  return j.at(key).get<std::uint64_t>();
}

inline std::string text(const json& j, const std::string& key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (!v.is_string()) throw SchemaError(ctx + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline Vec3 vec3(const json& j, const std::string& key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (!v.is_array() || v.size() != 3)
    throw SchemaError(ctx + "." + key + ": expected an array of 3 numbers");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

inline complexd cplx(const json& v, const std::string& ctx) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2) return {v[0].get<double>(), v[1].get<double>()};
  throw SchemaError(ctx + ": expected a number or [re, im] pair");
}

}  // namespace sj

// ---------------------------------------------------------------------------
// Field / surface / profile parsing
// ---------------------------------------------------------------------------

inline WaveField parse_field(const json& j, const std::string& ctx = "field") {
  const std::string type = sj::text(j, "type", ctx);
  const double mass = sj::number_or(j, "mass", 1.0);

  if (type == "plane_wave") return make_plane_wave(sj::vec3(j, "k", ctx), mass);

  if (type == "gaussian_packet") {
    GaussianPacket g;
    g.center = sj::vec3(j, "center", ctx);
    g.sigma0 = sj::number(j, "sigma0", ctx);
    g.momentum = sj::vec3(j, "momentum", ctx);
    if (!(g.sigma0 > 0.0)) throw SchemaError(ctx + ".sigma0: must be > 0");
    return WaveField{g, mass};
  }

  if (type == "double_slit") {
    DoubleSlit d;
    d.separation = sj::number(j, "separation", ctx);
    d.sigma0 = sj::number(j, "sigma0", ctx);
    d.momentum = j.contains("momentum") ? sj::vec3(j, "momentum", ctx) : Vec3{};
    d.chi_rel = sj::number_or(j, "chi_rel", 0.0);
    if (!(d.separation > 0.0)) throw SchemaError(ctx + ".separation: must be > 0");
    if (!(d.sigma0 > 0.0)) throw SchemaError(ctx + ".sigma0: must be > 0");
    return WaveField{d, mass};
  }

  if (type == "waveguide_spin") {
    WaveguideSpinField w;
    w.w = sj::number(j, "w", ctx);
    w.sigma0 = sj::number_or(j, "sigma0", 1.0);
    w.spin = SpinVector{sj::vec3(j, "spin", ctx)};
    if (!(w.w > 0.0)) throw SchemaError(ctx + ".w: must be > 0");
    if (!w.spin.is_unit())
      throw PreconditionError(ctx + ".spin: SpinVector must be a unit vector (|s| = 1)");
    return WaveField{w, mass};
  }

  if (type == "backflow_pair") {
    const Vec3 k1 = sj::vec3(j, "k1", ctx);
    const Vec3 k2 = sj::vec3(j, "k2", ctx);
    complexd alpha;
    const json& av = sj::require(j, "alpha", ctx);
    if (av.is_string() && av.get<std::string>() == "min")
      alpha = BackflowPair::alpha_min(k1, k2);
    else
      alpha = sj::cplx(av, ctx + ".alpha");
    return BackflowPair(k1, k2, alpha, mass).field();
  }

  if (type == "superposition") {
    const json& terms = sj::require(j, "terms", ctx);
    if (!terms.is_array() || terms.empty())
      throw SchemaError(ctx + ".terms: expected a non-empty array");
    std::vector<std::pair<complexd, WaveField>> parsed;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const std::string tctx = ctx + ".terms[" + std::to_string(i) + "]";
      parsed.emplace_back(sj::cplx(sj::require(terms[i], "coeff", tctx), tctx + ".coeff"),
                          parse_field(sj::require(terms[i], "field", tctx), tctx + ".field"));
    }
    return make_superposition(std::move(parsed), mass);
  }

  throw SchemaError(ctx + ".type: unknown field type '" + type + "'");
}

inline Surface parse_surface(const json& j, const std::string& ctx = "surface") {
  const std::string type = sj::text(j, "type", ctx);
  if (type == "plane_z") {
    PlaneZ p{sj::number(j, "z", ctx)};
    p.half_width = sj::number_or(j, "half_width", p.half_width);
    return Surface{p};
  }
  if (type == "plane_x") return Surface{PlaneX{sj::number(j, "x", ctx)}};
  if (type == "disk") {
    Disk d{sj::number(j, "z", ctx), sj::number(j, "radius", ctx)};
    if (!(d.radius > 0.0)) throw SchemaError(ctx + ".radius: must be > 0");
    return Surface{d};
  }
  throw SchemaError(ctx + ".type: unknown surface type '" + type + "'");
}

inline PMLProfile parse_pml_profile(const json& j, const std::string& ctx = "detector") {
  PMLProfile p;
  p.chi0 = sj::number(j, "chi0", ctx);
  p.d = sj::number(j, "d", ctx);
  p.a = sj::number_or(j, "a", 25.0);
  p.mass = sj::number_or(j, "mass", 1.0);
  const std::string dir = j.contains("direction") ? j.at("direction").get<std::string>()
                                                  : std::string("forward");
  if (dir == "forward")
    p.direction = PmlDirection::forward;
  else if (dir == "backward")
    p.direction = PmlDirection::backward;
  else
    throw SchemaError(ctx + ".direction: expected 'forward' or 'backward'");
  if (j.contains("design_k"))
    p.design_k = sj::vec3(j, "design_k", ctx);
  else
    p.design_k = {0.0, 0.0, sj::number(j, "kz", ctx)};
  if (!(p.chi0 >= 0.0)) throw SchemaError(ctx + ".chi0: must be >= 0");
  if (!(p.d > 0.0)) throw SchemaError(ctx + ".d: must be > 0");
  if (!(p.a > 0.0)) throw SchemaError(ctx + ".a: must be > 0");
  return p;
}

inline SlabDetector parse_slab(const json& j, const std::string& ctx = "detector") {
  SlabDetector s;
  s.N = sj::number(j, "N", ctx);
  s.f0 = sj::cplx(sj::require(j, "f0", ctx), ctx + ".f0");
  s.d = sj::number(j, "d", ctx);
  s.area = sj::number_or(j, "area", 1.0);
  if (s.N < 0.0) throw SchemaError(ctx + ".N: must be >= 0");
  if (!(s.d > 0.0)) throw SchemaError(ctx + ".d: must be > 0");
  if (s.f0.imag() < 0.0)
    throw PreconditionError(ctx + ".f0: absorber requires Im f0 >= 0");
  return s;
}

inline SpacetimeBox parse_spacetime_box(const json& j, const std::string& ctx) {
  SpacetimeBox b;
  b.lo = sj::vec3(j, "lo", ctx);
  b.hi = sj::vec3(j, "hi", ctx);
  b.t0 = sj::number(j, "t0", ctx);
  b.t1 = sj::number(j, "t1", ctx);
  if (!(b.hi.x > b.lo.x && b.hi.y > b.lo.y && b.hi.z > b.lo.z && b.t1 > b.t0))
    throw SchemaError(ctx + ": box must have positive extent in every axis");
  return b;
}

inline std::vector<double> parse_times(const json& j, const std::string& ctx) {
  if (j.is_array()) {
    std::vector<double> t = j.get<std::vector<double>>();
    if (t.empty()) throw SchemaError(ctx + ": empty time grid");
    return t;
  }
  if (j.is_object()) {
    const double start = sj::number(j, "start", ctx);
    const double stop = sj::number(j, "stop", ctx);
    const auto count = static_cast<std::size_t>(sj::number(j, "count", ctx));
    if (count < 2 || !(stop > start)) throw SchemaError(ctx + ": bad time grid");
    std::vector<double> t(count);
    for (std::size_t i = 0; i < count; ++i)
      t[i] = start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
    return t;
  }
  throw SchemaError(ctx + ": expected an array or {start, stop, count}");
}

// ---------------------------------------------------------------------------
// POVM family JSON (row-major complex pairs)
// ---------------------------------------------------------------------------

inline json family_to_json(const OperatorFamily& fam) {
  json members = json::array();
  for (const auto& m : fam.members) {
    json flat = json::array();
    for (int r = 0; r < fam.dim; ++r)
      for (int c = 0; c < fam.dim; ++c)
        flat.push_back({m(r, c).real(), m(r, c).imag()});
    members.push_back(std::move(flat));
  }
  return json{{"dim", fam.dim}, {"members", members}, {"labels", fam.labels}};
}

inline OperatorFamily family_from_json(const json& j, const std::string& ctx = "family") {
  OperatorFamily fam;
  fam.dim = static_cast<int>(sj::number(j, "dim", ctx));
  if (fam.dim < 1) throw SchemaError(ctx + ".dim: must be >= 1");
  const json& members = sj::require(j, "members", ctx);
  if (!members.is_array()) throw SchemaError(ctx + ".members: expected an array");
  for (const auto& flat : members) {
    if (!flat.is_array() || flat.size() != static_cast<std::size_t>(fam.dim * fam.dim))
      throw SchemaError(ctx + ".members: expected dim*dim row-major complex pairs");
    MatrixXc m(fam.dim, fam.dim);
    std::size_t idx = 0;
    for (int r = 0; r < fam.dim; ++r)
      for (int c = 0; c < fam.dim; ++c, ++idx)
        m(r, c) = sj::cplx(flat[idx], ctx + ".members");
    fam.members.push_back(std::move(m));
  }
  if (j.contains("labels")) fam.labels = j.at("labels").get<std::vector<std::string>>();
  while (fam.labels.size() < fam.members.size())
    fam.labels.push_back("O" + std::to_string(fam.labels.size()));
  return fam;
}

}  // namespace dbb
