#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bfsim/analysis.hpp"
#include "bfsim/crypto.hpp"
#include "bfsim/scenario.hpp"
#include "bfsim/script.hpp"

namespace py = pybind11;
using namespace bfsim;

namespace {

py::bytes to_py(ByteView b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

Bytes from_py(const py::bytes& b) {
    std::string s = b;
    return Bytes(s.begin(), s.end());
}

py::dict exec_result(const script::ExecResult& r) {
    py::list trace;
    for (const auto& step : r.trace) {
        py::list stack;
        for (const auto& item : step.stack_after) stack.append(to_py(item));
        trace.append(py::dict(py::arg("op") = step.op, py::arg("executed") = step.executed, py::arg("stack") = stack));
    }
    py::dict d;
    d["accepted"] = r.accepted;
    d["error"] = r.error ? py::cast(std::string(script::to_string(*r.error))) : py::none();
    d["trace"] = trace;
    return d;
}

}  // namespace

PYBIND11_MODULE(_bfsim, m) {
    m.doc() = "Brute-force address collision simulator";
    m.attr("__version__") = scenario::kVersion;

    py::register_exception<ParamsError>(m, "ParamsError", PyExc_ValueError);
    py::register_exception<scenario::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<script::ParseError>(m, "ScriptParseError", PyExc_ValueError);
    py::register_exception<crypto::AddressDecodeError>(m, "AddressDecodeError", PyExc_ValueError);

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init([](int secret_bits, int address_bits, int digest_bits, std::uint8_t version_byte,
                         int checksum_len) {
                 ModelParams p{secret_bits, address_bits, version_byte, checksum_len, digest_bits};
                 p.validate();
                 return p;
             }),
             py::arg("secret_bits") = 32, py::arg("address_bits") = 16, py::arg("digest_bits") = 32,
             py::arg("version_byte") = 0, py::arg("checksum_len") = 4)
        .def_readonly("secret_bits", &ModelParams::secret_bits)
        .def_readonly("address_bits", &ModelParams::address_bits)
        .def_readonly("digest_bits", &ModelParams::digest_bits)
        .def_readonly("version_byte", &ModelParams::version_byte)
        .def_readonly("checksum_len", &ModelParams::checksum_len)
        .def("__repr__", &ModelParams::describe);

    // Keys travel as hex strings.
    m.def("keygen", [](std::uint64_t seed, const ModelParams& p) { return crypto::keygen(seed, p).hex(); },
          py::arg("seed"), py::arg("params"));
    m.def("key_from_int", [](std::uint64_t v, const ModelParams& p) { return crypto::SecretKey::from_u64(v, p).hex(); },
          py::arg("value"), py::arg("params"));
    m.def("derive_pubkey",
          [](const std::string& sk, const ModelParams& p) {
              return to_py(crypto::derive_pubkey(crypto::SecretKey::from_hex(sk, p), p).data);
          },
          py::arg("secret_key"), py::arg("params"));
    m.def("derive_address",
          [](const std::string& sk, const ModelParams& p) {
              auto a = crypto::derive_address(crypto::derive_pubkey(crypto::SecretKey::from_hex(sk, p), p), p);
              return py::make_tuple(to_py(a.hash.view()), a.encoded);
          },
          py::arg("secret_key"), py::arg("params"), "(address hash bytes, Base58Check text)");
    m.def("decode_address",
          [](const std::string& text, const ModelParams& p) {
              auto d = crypto::decode_address(text, p);
              return py::make_tuple(d.version, to_py(d.hash.view()));
          },
          py::arg("text"), py::arg("params"));
    m.def("sign",
          [](const std::string& sk, const py::bytes& msg, const ModelParams& p) {
              return to_py(crypto::sign(crypto::SecretKey::from_hex(sk, p), from_py(msg), p).data);
          },
          py::arg("secret_key"), py::arg("message"), py::arg("params"));
    m.def("verify",
          [](const py::bytes& pk, const py::bytes& msg, const py::bytes& sig, const ModelParams& p) {
              return crypto::verify({from_py(pk)}, from_py(msg), {from_py(sig)}, p);
          },
          py::arg("pubkey"), py::arg("message"), py::arg("signature"), py::arg("params"));
    m.def("base58check", [](const py::bytes& payload, std::size_t checksum_len) {
        return crypto::base58::encode_check(from_py(payload), checksum_len);
    }, py::arg("payload"), py::arg("checksum_len") = 4);

    m.def("execute_script",
          [](const std::string& script_sig, const std::string& script_pubkey, const py::bytes& msg,
             const ModelParams& p) {
              return exec_result(script::execute(script::parse_script(script_sig), script::parse_script(script_pubkey),
                                                 {from_py(msg), p}));
          },
          py::arg("script_sig"), py::arg("script_pubkey"), py::arg("message"), py::arg("params"));
    m.def("reward_script", [] { return script::print_script(script::reward_script_template()); });

    m.def("epsilon_bound",
          [](const ModelParams& p, double k) {
              auto b = analysis::epsilon_bound(p, k);
              return py::dict(py::arg("k") = static_cast<double>(b.k), py::arg("n0") = static_cast<double>(b.n0),
                              py::arg("term_cdf") = static_cast<double>(b.term_cdf),
                              py::arg("term_inv") = static_cast<double>(b.term_inv),
                              py::arg("bound") = static_cast<double>(b.bound));
          },
          py::arg("params"), py::arg("k") = 0.36);
    m.def("optimize_k", [](const ModelParams& p) {
        auto o = analysis::optimize_k(p);
        return py::make_tuple(static_cast<double>(o.k), static_cast<double>(o.coefficient));
    }, py::arg("params"), "(k*, f(k*))");
    m.def("epsilon_exact",
          [](const ModelParams& p, unsigned workers) {
              py::gil_scoped_release release;
              return static_cast<double>(analysis::epsilon_exact(p, workers));
          },
          py::arg("params"), py::arg("workers") = 1);
    m.def("monte_carlo_evidence",
          [](const ModelParams& p, std::uint64_t trials, std::uint64_t seed, unsigned workers) {
              analysis::EvidenceTrials t;
              {
                  py::gil_scoped_release release;
                  t = analysis::monte_carlo_evidence(p, trials, seed, workers);
              }
              return py::dict(py::arg("evidence_ok") = t.evidence_ok, py::arg("same_key") = t.same_key);
          },
          py::arg("params"), py::arg("trials"), py::arg("seed") = 1, py::arg("workers") = 1);
    m.def("preimage_counts",
          [](const ModelParams& p, std::uint64_t samples, std::uint64_t seed) {
              return analysis::preimage_distribution(p, samples, seed).counts;
          },
          py::arg("params"), py::arg("samples"), py::arg("seed") = 1);

    m.def("simulate_json",
          [](const std::string& config_text, std::optional<std::uint64_t> seed) {
              auto cfg = scenario::parse_config(config_text);
              if (seed) cfg.seed = *seed;
              scenario::SimulationResult r = [&] {
                  py::gil_scoped_release release;
                  return scenario::run_simulation(cfg);
              }();
              return py::make_tuple(r.report.dump(2), r.violation ? py::cast(*r.violation) : py::none());
          },
          py::arg("config_text") = "", py::arg("seed") = py::none(), "(report JSON text, violated invariant or None)");
}
