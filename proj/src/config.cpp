#include "grasp/config.hpp"

#include <json.hpp>

#include <stdexcept>

namespace grasp {
namespace {

using nlohmann::json;

// Applies present keys onto defaults and rejects unknown ones.
class FieldReader {
 public:
  FieldReader(const json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
    if (!j_.is_object())
      throw std::invalid_argument(scope_ + " must be a JSON object");
    for (const auto& [key, _] : j_.items()) seen_[key] = false;
  }

  template <typename T>
  void get(const char* key, T& value) {
    if (auto it = j_.find(key); it != j_.end()) {
      it->get_to(value);
      seen_[key] = true;
    }
  }

  const json* sub(const char* key) {
    if (auto it = j_.find(key); it != j_.end()) {
      seen_[key] = true;
      return &*it;
    }
    return nullptr;
  }

  void finish() const {
    for (const auto& [key, used] : seen_)
      if (!used)
        throw std::invalid_argument("unknown field '" + key + "' in " + scope_);
  }

 private:
  const json& j_;
  std::string scope_;
  std::map<std::string, bool> seen_;
};

void read_qp(const json& j, QpParams& p) {
  FieldReader r(j, "qp");
  r.get("rho", p.rho);
  r.get("sigma", p.sigma);
  r.get("alpha", p.alpha);
  r.get("max_iters", p.max_iters);
  r.get("eps_primal", p.eps_primal);
  r.get("eps_dual", p.eps_dual);
  r.get("check_interval", p.check_interval);
  r.finish();
}

void read_contact(const json& j, ContactParams& p) {
  FieldReader r(j, "contact");
  r.get("mu", p.mu);
  r.get("n_edges", p.n_edges);
  r.finish();
}

void read_energy(const json& j, EnergyParams& p) {
  FieldReader r(j, "energy");
  r.get("beta", p.beta);
  r.get("gamma_per_contact", p.gamma_per_contact);
  r.finish();
}

void read_weights(const json& j, ObjectiveWeights& p) {
  FieldReader r(j, "weights");
  r.get("grasp", p.grasp);
  r.get("distance", p.distance);
  r.get("joint_limit", p.joint_limit);
  r.get("self_penetration", p.self_penetration);
  r.get("object_penetration", p.object_penetration);
  r.finish();
}

void read_stage(const json& j, const char* name, StageSchedule& s) {
  FieldReader r(j, name);
  r.get("iters", s.iters);
  r.get("step_rotation", s.step_rotation);
  r.get("step_translation", s.step_translation);
  r.get("step_joints", s.step_joints);
  r.get("step_floor", s.step_floor);
  r.finish();
}

void read_pipeline(const json& j, PipelineParams& p) {
  FieldReader r(j, "pipeline");
  if (const json* s = r.sub("coarse")) read_stage(*s, "pipeline.coarse", p.coarse);
  if (const json* s = r.sub("fine")) read_stage(*s, "pipeline.fine", p.fine);
  if (const json* s = r.sub("final")) read_stage(*s, "pipeline.final", p.final_stage);
  r.get("contact_offset", p.contact_offset);
  r.get("fd_step", p.fd_step);
  r.get("skip_fine_stages", p.skip_fine_stages);
  r.finish();
}

void read_init(const json& j, InitParams& p) {
  FieldReader r(j, "init");
  r.get("standoff", p.standoff);
  r.get("joint_span_fraction", p.joint_span_fraction);
  r.finish();
}

void read_eval(const json& j, EvalParams& p) {
  FieldReader r(j, "eval");
  r.get("mass", p.mass);
  r.get("gravity", p.gravity);
  r.get("residual_rel_tol", p.residual_rel_tol);
  r.get("force_budget_factor", p.force_budget_factor);
  r.get("contact_tol", p.contact_tol);
  r.get("penetration_tol", p.penetration_tol);
  r.get("qp_eps", p.qp_eps);
  r.finish();
}

json dump_stage(const StageSchedule& s) {
  return json{{"iters", s.iters},
              {"step_rotation", s.step_rotation},
              {"step_translation", s.step_translation},
              {"step_joints", s.step_joints},
              {"step_floor", s.step_floor}};
}

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(std::string("config: ") + what);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  const json j = json::parse(json_text);
  RunConfig cfg;
  FieldReader r(j, "config");
  if (const json* s = r.sub("qp")) read_qp(*s, cfg.qp);
  if (const json* s = r.sub("contact")) read_contact(*s, cfg.contact);
  if (const json* s = r.sub("energy")) read_energy(*s, cfg.energy);
  if (const json* s = r.sub("weights")) read_weights(*s, cfg.weights);
  if (const json* s = r.sub("pipeline")) read_pipeline(*s, cfg.pipeline);
  if (const json* s = r.sub("init")) read_init(*s, cfg.init);
  if (const json* s = r.sub("eval")) read_eval(*s, cfg.eval);
  r.get("seed", cfg.seed);
  r.get("batch", cfg.batch);
  r.get("workers", cfg.workers);
  r.finish();
  validate(cfg);
  return cfg;
}

std::string dump_run_config(const RunConfig& cfg) {
  json j;
  j["qp"] = {{"rho", cfg.qp.rho},
             {"sigma", cfg.qp.sigma},
             {"alpha", cfg.qp.alpha},
             {"max_iters", cfg.qp.max_iters},
             {"eps_primal", cfg.qp.eps_primal},
             {"eps_dual", cfg.qp.eps_dual},
             {"check_interval", cfg.qp.check_interval}};
  j["contact"] = {{"mu", cfg.contact.mu}, {"n_edges", cfg.contact.n_edges}};
  j["energy"] = {{"beta", cfg.energy.beta},
                 {"gamma_per_contact", cfg.energy.gamma_per_contact}};
  j["weights"] = {{"grasp", cfg.weights.grasp},
                  {"distance", cfg.weights.distance},
                  {"joint_limit", cfg.weights.joint_limit},
                  {"self_penetration", cfg.weights.self_penetration},
                  {"object_penetration", cfg.weights.object_penetration}};
  j["pipeline"] = {{"coarse", dump_stage(cfg.pipeline.coarse)},
                   {"fine", dump_stage(cfg.pipeline.fine)},
                   {"final", dump_stage(cfg.pipeline.final_stage)},
                   {"contact_offset", cfg.pipeline.contact_offset},
                   {"fd_step", cfg.pipeline.fd_step},
                   {"skip_fine_stages", cfg.pipeline.skip_fine_stages}};
  j["init"] = {{"standoff", cfg.init.standoff},
               {"joint_span_fraction", cfg.init.joint_span_fraction}};
  j["eval"] = {{"mass", cfg.eval.mass},
               {"gravity", cfg.eval.gravity},
               {"residual_rel_tol", cfg.eval.residual_rel_tol},
               {"force_budget_factor", cfg.eval.force_budget_factor},
               {"contact_tol", cfg.eval.contact_tol},
               {"penetration_tol", cfg.eval.penetration_tol},
               {"qp_eps", cfg.eval.qp_eps}};
  j["seed"] = cfg.seed;
  j["batch"] = cfg.batch;
  j["workers"] = cfg.workers;
  return j.dump(2);
}

void validate(const RunConfig& cfg) {
  require(cfg.qp.rho > 0, "qp.rho must be positive");
  require(cfg.qp.sigma > 0, "qp.sigma must be positive");
  require(cfg.qp.alpha > 0 && cfg.qp.alpha < 2, "qp.alpha must lie in (0, 2)");
  require(cfg.qp.max_iters > 0, "qp.max_iters must be positive");
  require(cfg.qp.eps_primal > 0 && cfg.qp.eps_dual > 0, "qp tolerances must be positive");
  require(cfg.qp.check_interval > 0, "qp.check_interval must be positive");
  require(cfg.contact.mu > 0, "contact.mu must be positive");
  require(cfg.contact.n_edges >= 3, "contact.n_edges must be at least 3");
  require(cfg.energy.beta >= 0, "energy.beta must be nonnegative");
  require(cfg.energy.gamma_per_contact >= 0 && cfg.energy.gamma_per_contact <= 1,
          "energy.gamma_per_contact must lie in [0, 1]");
  for (const StageSchedule* s :
       {&cfg.pipeline.coarse, &cfg.pipeline.fine, &cfg.pipeline.final_stage}) {
    require(s->iters >= 0, "stage iters must be nonnegative");
    require(s->step_rotation >= 0 && s->step_translation >= 0 && s->step_joints >= 0,
            "stage steps must be nonnegative");
    require(s->step_floor > 0 && s->step_floor <= 1, "stage step_floor must lie in (0, 1]");
  }
  require(cfg.pipeline.contact_offset >= 0, "pipeline.contact_offset must be nonnegative");
  require(cfg.pipeline.fd_step > 0, "pipeline.fd_step must be positive");
  require(cfg.init.standoff >= 0, "init.standoff must be nonnegative");
  require(cfg.init.joint_span_fraction >= 0 && cfg.init.joint_span_fraction <= 1,
          "init.joint_span_fraction must lie in [0, 1]");
  require(cfg.eval.mass > 0, "eval.mass must be positive");
  require(cfg.eval.gravity > 0, "eval.gravity must be positive");
  require(cfg.eval.residual_rel_tol > 0, "eval.residual_rel_tol must be positive");
  require(cfg.eval.force_budget_factor > 0, "eval.force_budget_factor must be positive");
  require(cfg.eval.contact_tol >= 0, "eval.contact_tol must be nonnegative");
  require(cfg.eval.penetration_tol >= 0, "eval.penetration_tol must be nonnegative");
  require(cfg.eval.qp_eps > 0, "eval.qp_eps must be positive");
  require(cfg.batch > 0, "batch must be positive");
  require(cfg.workers > 0, "workers must be positive");
}

}  // namespace grasp
