#include <algorithm>
#include <sstream>

#include "postural/error.hpp"
#include "postural/graph.hpp"
#include "postural/text.hpp"

namespace postural {

namespace {

LayerRules network_rules() {
  LayerRules r;
  r.layer = Layer::Network;
  r.keywords = {"access control", "authentication", "authenticity", "authorization", "availability",
                "botnet", "cdn", "certificate", "certificates", "client", "cloud",
                "communication protocol", "confidentiality", "cross-site request forgery",
                "cross-site scripting", "csrf", "ddos", "denial of service", "dos", "downgrade",
                "edge network", "edge nodes", "endpoints", "firewall", "flood", "flooding", "html",
                "icn", "injection", "input sanitization", "input validation", "integrity", "iot",
                "lan", "man-in-the-middle", "message", "mirai", "mitm", "nat", "network",
                "network interface", "network packets", "packets", "port", "ports", "privacy",
                "protocol", "remote attacker", "remote attackers", "repudiation", "request",
                "response", "router", "sase", "sdn", "server", "side-channel", "spoof", "spoofing",
                "sql", "switch", "tamper", "tampering", "trust", "verification", "vpn", "wireless",
                "xss", "zero-trust", "zta", "link"};
  r.protocols = {"tls",  "ssl",  "tcp",    "ip",   "http", "https", "ftp",    "ftps", "udp",
                 "lte",  "wifi", "bluetooth", "arp", "mqtt", "coap", "amqp", "lora", "zigbee",
                 "wep",  "wpa",  "icmp",   "tor",  "i2p",  "telnet", "dhcp", "dns"};
  r.cwe_ids = {20,  79,  80,  83,  87,  89,  90,  91,  93,  97,  98,  113,  183,  184,  200,
               209, 213, 269, 282, 284, 285, 286, 287, 288, 289, 290, 294,  295,  296,  297,
               298, 299, 301, 302, 303, 304, 305, 306, 307, 308, 322, 345,  346,  352,  359,
               385, 417, 419, 420, 425, 441, 497, 515, 522, 564, 566, 593,  599,  601,  603,
               611, 613, 614, 638, 639, 643, 644, 645, 652, 706, 776, 836,  862,  863,  918,
               923, 924, 939, 940, 941, 942, 1004, 1211, 1214, 1220, 1263, 1270, 1275, 1311,
               1327, 1331, 1385};
  return r;
}

// The three lists below are curated for this tool, not taken from a
// published table.
LayerRules system_hardware_rules() {
  LayerRules r;
  r.layer = Layer::SystemHardware;
  r.keywords = {"kernel", "linux kernel", "firmware", "bios", "uefi", "bootloader", "cpu",
                "processor", "microcode", "hypervisor", "virtual machine", "operating system",
                "device driver", "driver", "memory corruption", "buffer overflow",
                "heap-based buffer overflow", "stack-based buffer overflow", "buffer over-read",
                "out-of-bounds read", "out-of-bounds write", "use after free", "use-after-free",
                "double free", "null pointer dereference", "race condition", "integer overflow",
                "local attacker", "local attackers", "local user", "local users",
                "physically proximate attacker", "physical access", "hardware", "gpu", "dma",
                "spectre", "meltdown", "rowhammer", "privilege escalation", "escalate privileges",
                "system crash", "memory leak"};
  r.protocols = {"usb", "pcie", "jtag", "uart", "spi", "i2c"};
  r.cwe_ids = {119, 120, 121, 122, 125, 190, 191, 362, 367, 400, 401, 415, 416, 476, 787, 824,
               908, 1189, 1191, 1231, 1233, 1256, 1260, 1274, 1300, 1319};
  return r;
}

LayerRules machine_learning_rules() {
  LayerRules r;
  r.layer = Layer::MachineLearning;
  r.keywords = {"tensorflow", "tensorflow lite", "tflite", "pytorch", "torch", "keras", "onnx",
                "caffe", "mxnet", "scikit-learn", "sklearn", "xgboost", "huggingface",
                "machine learning", "deep learning", "neural network", "tensor", "tensors",
                "inference", "model training", "training data", "adversarial", "cuda", "cudnn",
                "jax", "paddlepaddle", "mlflow", "tokenizer", "embedding"};
  r.protocols = {"grpc"};
  r.cwe_ids = {1039, 1426, 1427};
  return r;
}

LayerRules crypto_rules() {
  LayerRules r;
  r.layer = Layer::Crypto;
  r.keywords = {"cryptographic", "cryptography", "crypto", "encryption", "decryption", "encrypt",
                "decrypt", "cipher", "ciphertext", "plaintext", "key exchange", "private key",
                "public key", "rsa", "aes", "des", "3des", "rc4", "ecdsa", "dsa", "md5", "sha1",
                "sha-1", "hash", "hmac", "nonce", "random number", "entropy", "openssl",
                "libressl", "boringssl", "gnutls", "wolfssl", "mbed tls", "signature",
                "padding oracle", "timing attack", "side channel", "x.509"};
  r.protocols = {"tls", "ssl", "ssh", "ipsec", "dtls"};
  r.cwe_ids = {261, 295, 310, 311, 312, 319, 320, 321, 322, 323, 324, 325, 326, 327, 328, 329,
               330, 331, 335, 338, 347, 757, 780, 916, 1240};
  return r;
}

}  // namespace

const std::vector<LayerRules>& default_layer_rules() {
  static const std::vector<LayerRules> rules = {network_rules(), system_hardware_rules(),
                                                machine_learning_rules(), crypto_rules()};
  return rules;
}

LayerRules parse_layer_rules(std::string_view document) {
  LayerRules rules;
  bool have_format = false;
  bool have_layer = false;
  std::size_t lineno = 0;
  for (const auto& raw : text::split(document, '\n')) {
    ++lineno;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto sp = trimmed.find(' ');
    const auto key = trimmed.substr(0, sp);
    const auto value = sp == std::string::npos ? std::string{} : text::trim(trimmed.substr(sp + 1));
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::MalformedRules, "line " + std::to_string(lineno) + ": " + why);
    };
    if (!have_format) {
      if (key != "format" || value != "layer-rules-v1") throw fail("expected 'format layer-rules-v1'");
      have_format = true;
    } else if (key == "layer") {
      auto l = layer_from_string(value);
      if (!l) throw fail("unknown layer '" + value + "'");
      rules.layer = *l;
      have_layer = true;
    } else if (key == "keyword") {
      if (value.empty()) throw fail("empty keyword");
      rules.keywords.insert(text::to_lower(value));
    } else if (key == "protocol") {
      if (value.empty()) throw fail("empty protocol");
      rules.protocols.insert(text::to_lower(value));
    } else if (key == "cwe") {
      try {
        std::size_t used = 0;
        const int id = std::stoi(value, &used);
        if (used != value.size() || id <= 0) throw fail("bad CWE id '" + value + "'");
        rules.cwe_ids.insert(id);
      } catch (const std::logic_error&) {
        throw fail("bad CWE id '" + value + "'");
      }
    } else {
      throw fail("unknown directive '" + key + "'");
    }
  }
  if (!have_format || !have_layer) {
    throw Error(ErrorCode::MalformedRules, "rules file needs a format line and a layer line");
  }
  return rules;
}

std::string dump_layer_rules(const LayerRules& rules) {
  std::ostringstream out;
  out << "format layer-rules-v1\n";
  out << "layer " << to_string(rules.layer) << "\n";
  for (const auto& k : rules.keywords) out << "keyword " << k << "\n";
  for (const auto& p : rules.protocols) out << "protocol " << p << "\n";
  for (int c : rules.cwe_ids) out << "cwe " << c << "\n";
  return out.str();
}

LayerMatch classify_layers(const GraphNode& node, std::string_view description,
                           const std::vector<LayerRules>& rules) {
  LayerMatch match;
  const auto lower = text::to_lower(description);
  for (const auto& r : rules) {
    bool hit = std::any_of(node.cwe_ids.begin(), node.cwe_ids.end(),
                           [&](int id) { return r.cwe_ids.contains(id); });
    for (const auto* set : {&r.keywords, &r.protocols}) {
      for (auto it = set->begin(); !hit && it != set->end(); ++it) {
        hit = !text::find_whole_word(lower, *it).empty();
      }
    }
    if (hit) match.layers.insert(r.layer);
  }
  return match;
}

}  // namespace postural
