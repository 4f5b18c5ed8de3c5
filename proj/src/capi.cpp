#include "logsde.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "logsde/coeffs.hpp"
#include "logsde/manifest.hpp"

#include "json.hpp"

struct logsde_field {
  logsde::CoefficientField field;
};

namespace {

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_error(char** error_out, const std::string& message) {
  if (error_out) *error_out = dup_string(message);
}

template <class Fn>
logsde_status guarded(char** error_out, Fn&& fn) {
  try {
    return fn();
  } catch (const logsde::validation_error& e) {
    set_error(error_out, e.what());
    return LOGSDE_INVALID_ARGUMENT;
  } catch (const logsde::numerical_error& e) {
    set_error(error_out, e.what());
    return LOGSDE_NUMERICAL_ERROR;
  } catch (const std::exception& e) {
    set_error(error_out, e.what());
    return LOGSDE_INTERNAL_ERROR;
  } catch (...) {
    set_error(error_out, "unknown error");
    return LOGSDE_INTERNAL_ERROR;
  }
}

}  // namespace

extern "C" {

const char* logsde_version(void) { return "0.1.0"; }

const char* logsde_status_name(logsde_status s) {
  switch (s) {
    case LOGSDE_OK:
      return "ok";
    case LOGSDE_INVALID_ARGUMENT:
      return "invalid_argument";
    case LOGSDE_NUMERICAL_ERROR:
      return "numerical_error";
    default:
      return "internal_error";
  }
}

void logsde_string_free(char* s) { std::free(s); }

logsde_status logsde_field_create(const char* key, const char* params_json, logsde_field** out,
                                  char** error_out) {
  if (!key || !out) {
    set_error(error_out, "key and out must be non-null");
    return LOGSDE_INVALID_ARGUMENT;
  }
  *out = nullptr;
  return guarded(error_out, [&] {
    nlohmann::json params = nlohmann::json::object();
    if (params_json && *params_json) {
      params = nlohmann::json::parse(params_json, nullptr, false);
      if (params.is_discarded()) throw logsde::validation_error("params is not valid JSON");
    }
    auto* handle = new logsde_field{logsde::make_field(key, params)};
    *out = handle;
    return LOGSDE_OK;
  });
}

void logsde_field_destroy(logsde_field* field) { delete field; }

logsde_status logsde_field_dims(const logsde_field* field, int32_t* dim_state,
                                int32_t* dim_noise) {
  if (!field) return LOGSDE_INVALID_ARGUMENT;
  if (dim_state) *dim_state = field->field.dim_state();
  if (dim_noise) *dim_noise = field->field.dim_noise();
  return LOGSDE_OK;
}

logsde_status logsde_field_eval(const logsde_field* field, const double* x, size_t x_len,
                                double* drift_out, double* diffusion_out, char** error_out) {
  if (!field || !x) {
    set_error(error_out, "field and x must be non-null");
    return LOGSDE_INVALID_ARGUMENT;
  }
  return guarded(error_out, [&] {
    const auto eval = logsde::eval_field(field->field, {x, x_len});
    if (drift_out) std::memcpy(drift_out, eval.drift.data(), eval.drift.size() * sizeof(double));
    if (diffusion_out)
      std::memcpy(diffusion_out, eval.diffusion.data(),
                  eval.diffusion.size() * sizeof(double));
    return LOGSDE_OK;
  });
}

logsde_status logsde_run_manifest(const char* manifest_json, const char* out_dir,
                                  int32_t threads, int32_t dry_run, char** files_json_out,
                                  char** diag_json_out) {
  if (!manifest_json) {
    set_error(diag_json_out, "{\"error\":\"manifest_json must be non-null\",\"kind\":\"validation\"}");
    return LOGSDE_INVALID_ARGUMENT;
  }
  return guarded(diag_json_out, [&] {
    const logsde::Manifest manifest = logsde::Manifest::from_string(manifest_json);
    const logsde::RunResult result = logsde::run_manifest(
        manifest, out_dir ? out_dir : "", threads, dry_run != 0);
    if (result.exit_code != 0) {
      set_error(diag_json_out, result.diagnostic);
      return result.exit_code == 2 ? LOGSDE_INVALID_ARGUMENT : LOGSDE_NUMERICAL_ERROR;
    }
    if (files_json_out) {
      nlohmann::json files = nlohmann::json::array();
      for (const auto& f : result.files) files.push_back(f);
      *files_json_out = dup_string(files.dump());
    }
    return LOGSDE_OK;
  });
}

logsde_status logsde_manifest_digest(const char* manifest_json, char** digest_out,
                                     char** error_out) {
  if (!manifest_json || !digest_out) {
    set_error(error_out, "manifest_json and digest_out must be non-null");
    return LOGSDE_INVALID_ARGUMENT;
  }
  return guarded(error_out, [&] {
    const logsde::Manifest manifest = logsde::Manifest::from_string(manifest_json);
    *digest_out = dup_string(manifest.digest_hex());
    return LOGSDE_OK;
  });
}

logsde_status logsde_manifest_experiment(const char* manifest_json, char** experiment_out,
                                         char** error_out) {
  if (!manifest_json || !experiment_out) {
    set_error(error_out, "manifest_json and experiment_out must be non-null");
    return LOGSDE_INVALID_ARGUMENT;
  }
  return guarded(error_out, [&] {
    const logsde::Manifest manifest = logsde::Manifest::from_string(manifest_json);
    *experiment_out = dup_string(manifest.experiment);
    return LOGSDE_OK;
  });
}

}  // extern "C"
