#include "postural/cwe_catalog.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace postural {

namespace {

struct Entry {
  int id;
  std::string_view name;
};

// Sorted by id.
constexpr Entry kCatalog[] = {
    {20, "Improper Input Validation"},
    {22, "Improper Limitation of a Pathname to a Restricted Directory ('Path Traversal')"},
    {59, "Improper Link Resolution Before File Access ('Link Following')"},
    {77, "Improper Neutralization of Special Elements used in a Command ('Command Injection')"},
    {78, "Improper Neutralization of Special Elements used in an OS Command ('OS Command Injection')"},
    {79, "Improper Neutralization of Input During Web Page Generation ('Cross-site Scripting')"},
    {80, "Improper Neutralization of Script-Related HTML Tags in a Web Page (Basic XSS)"},
    {83, "Improper Neutralization of Script in Attributes in a Web Page"},
    {87, "Improper Neutralization of Alternate XSS Syntax"},
    {89, "Improper Neutralization of Special Elements used in an SQL Command ('SQL Injection')"},
    {90, "Improper Neutralization of Special Elements used in an LDAP Query ('LDAP Injection')"},
    {91, "XML Injection (aka Blind XPath Injection)"},
    {93, "Improper Neutralization of CRLF Sequences ('CRLF Injection')"},
    {94, "Improper Control of Generation of Code ('Code Injection')"},
    {97, "Improper Neutralization of Server-Side Includes (SSI) Within a Web Page"},
    {98, "Improper Control of Filename for Include/Require Statement in PHP Program ('PHP Remote File Inclusion')"},
    {113, "Improper Neutralization of CRLF Sequences in HTTP Headers ('HTTP Request/Response Splitting')"},
    {119, "Improper Restriction of Operations within the Bounds of a Memory Buffer"},
    {120, "Buffer Copy without Checking Size of Input ('Classic Buffer Overflow')"},
    {121, "Stack-based Buffer Overflow"},
    {122, "Heap-based Buffer Overflow"},
    {125, "Out-of-bounds Read"},
    {134, "Use of Externally-Controlled Format String"},
    {183, "Permissive List of Allowed Inputs"},
    {184, "Incomplete List of Disallowed Inputs"},
    {189, "Numeric Errors"},
    {190, "Integer Overflow or Wraparound"},
    {191, "Integer Underflow (Wrap or Wraparound)"},
    {200, "Exposure of Sensitive Information to an Unauthorized Actor"},
    {203, "Observable Discrepancy"},
    {208, "Observable Timing Discrepancy"},
    {209, "Generation of Error Message Containing Sensitive Information"},
    {213, "Exposure of Sensitive Information Due to Incompatible Policies"},
    {252, "Unchecked Return Value"},
    {261, "Weak Encoding for Password"},
    {264, "Permissions, Privileges, and Access Controls"},
    {269, "Improper Privilege Management"},
    {276, "Incorrect Default Permissions"},
    {282, "Improper Ownership Management"},
    {284, "Improper Access Control"},
    {285, "Improper Authorization"},
    {286, "Incorrect User Management"},
    {287, "Improper Authentication"},
    {288, "Authentication Bypass Using an Alternate Path or Channel"},
    {289, "Authentication Bypass by Alternate Name"},
    {290, "Authentication Bypass by Spoofing"},
    {294, "Authentication Bypass by Capture-replay"},
    {295, "Improper Certificate Validation"},
    {296, "Improper Following of a Certificate's Chain of Trust"},
    {297, "Improper Validation of Certificate with Host Mismatch"},
    {298, "Improper Validation of Certificate Expiration"},
    {299, "Improper Check for Certificate Revocation"},
    {301, "Reflection Attack in an Authentication Protocol"},
    {302, "Authentication Bypass by Assumed-Immutable Data"},
    {303, "Incorrect Implementation of Authentication Algorithm"},
    {304, "Missing Critical Step in Authentication"},
    {305, "Authentication Bypass by Primary Weakness"},
    {306, "Missing Authentication for Critical Function"},
    {307, "Improper Restriction of Excessive Authentication Attempts"},
    {308, "Use of Single-factor Authentication"},
    {310, "Cryptographic Issues"},
    {311, "Missing Encryption of Sensitive Data"},
    {312, "Cleartext Storage of Sensitive Information"},
    {319, "Cleartext Transmission of Sensitive Information"},
    {320, "Key Management Errors"},
    {321, "Use of Hard-coded Cryptographic Key"},
    {322, "Key Exchange without Entity Authentication"},
    {323, "Reusing a Nonce, Key Pair in Encryption"},
    {324, "Use of a Key Past its Expiration Date"},
    {325, "Missing Cryptographic Step"},
    {326, "Inadequate Encryption Strength"},
    {327, "Use of a Broken or Risky Cryptographic Algorithm"},
    {328, "Use of Weak Hash"},
    {329, "Generation of Predictable IV with CBC Mode"},
    {330, "Use of Insufficiently Random Values"},
    {331, "Insufficient Entropy"},
    {335, "Incorrect Usage of Seeds in Pseudo-Random Number Generator (PRNG)"},
    {338, "Use of Cryptographically Weak Pseudo-Random Number Generator (PRNG)"},
    {345, "Insufficient Verification of Data Authenticity"},
    {346, "Origin Validation Error"},
    {347, "Improper Verification of Cryptographic Signature"},
    {352, "Cross-Site Request Forgery (CSRF)"},
    {359, "Exposure of Private Personal Information to an Unauthorized Actor"},
    {362, "Concurrent Execution using Shared Resource with Improper Synchronization ('Race Condition')"},
    {367, "Time-of-check Time-of-use (TOCTOU) Race Condition"},
    {369, "Divide By Zero"},
    {385, "Covert Timing Channel"},
    {399, "Resource Management Errors"},
    {400, "Uncontrolled Resource Consumption"},
    {401, "Missing Release of Memory after Effective Lifetime"},
    {415, "Double Free"},
    {416, "Use After Free"},
    {417, "Communication Channel Errors"},
    {419, "Unprotected Primary Channel"},
    {420, "Unprotected Alternate Channel"},
    {425, "Direct Request ('Forced Browsing')"},
    {426, "Untrusted Search Path"},
    {427, "Uncontrolled Search Path Element"},
    {434, "Unrestricted Upload of File with Dangerous Type"},
    {441, "Unintended Proxy or Intermediary ('Confused Deputy')"},
    {457, "Use of Uninitialized Variable"},
    {476, "NULL Pointer Dereference"},
    {497, "Exposure of Sensitive System Information to an Unauthorized Control Sphere"},
    {502, "Deserialization of Untrusted Data"},
    {515, "Covert Storage Channel"},
    {522, "Insufficiently Protected Credentials"},
    {532, "Insertion of Sensitive Information into Log File"},
    {564, "SQL Injection: Hibernate"},
    {566, "Authorization Bypass Through User-Controlled SQL Primary Key"},
    {593, "Authentication Bypass: OpenSSL CTX Object Modified after SSL Objects are Created"},
    {599, "Missing Validation of OpenSSL Certificate"},
    {601, "URL Redirection to Untrusted Site ('Open Redirect')"},
    {603, "Use of Client-Side Authentication"},
    {611, "Improper Restriction of XML External Entity Reference"},
    {613, "Insufficient Session Expiration"},
    {614, "Sensitive Cookie in HTTPS Session Without 'Secure' Attribute"},
    {617, "Reachable Assertion"},
    {638, "Not Using Complete Mediation"},
    {639, "Authorization Bypass Through User-Controlled Key"},
    {643, "Improper Neutralization of Data within XPath Expressions ('XPath Injection')"},
    {644, "Improper Neutralization of HTTP Headers for Scripting Syntax"},
    {645, "Overly Restrictive Account Lockout Mechanism"},
    {652, "Improper Neutralization of Data within XQuery Expressions ('XQuery Injection')"},
    {667, "Improper Locking"},
    {668, "Exposure of Resource to Wrong Sphere"},
    {674, "Uncontrolled Recursion"},
    {682, "Incorrect Calculation"},
    {704, "Incorrect Type Conversion or Cast"},
    {706, "Use of Incorrectly-Resolved Name or Reference"},
    {732, "Incorrect Permission Assignment for Critical Resource"},
    {754, "Improper Check for Unusual or Exceptional Conditions"},
    {757, "Selection of Less-Secure Algorithm During Negotiation ('Algorithm Downgrade')"},
    {770, "Allocation of Resources Without Limits or Throttling"},
    {772, "Missing Release of Resource after Effective Lifetime"},
    {776, "Improper Restriction of Recursive Entity References in DTDs ('XML Entity Expansion')"},
    {780, "Use of RSA Algorithm without OAEP"},
    {787, "Out-of-bounds Write"},
    {798, "Use of Hard-coded Credentials"},
    {824, "Access of Uninitialized Pointer"},
    {834, "Excessive Iteration"},
    {835, "Loop with Unreachable Exit Condition ('Infinite Loop')"},
    {836, "Use of Password Hash Instead of Password for Authentication"},
    {843, "Access of Resource Using Incompatible Type ('Type Confusion')"},
    {862, "Missing Authorization"},
    {863, "Incorrect Authorization"},
    {908, "Use of Uninitialized Resource"},
    {916, "Use of Password Hash With Insufficient Computational Effort"},
    {918, "Server-Side Request Forgery (SSRF)"},
    {923, "Improper Restriction of Communication Channel to Intended Endpoints"},
    {924, "Improper Enforcement of Message Integrity During Transmission in a Communication Channel"},
    {939, "Improper Authorization in Handler for Custom URL Scheme"},
    {940, "Improper Verification of Source of a Communication Channel"},
    {941, "Incorrectly Specified Destination in a Communication Channel"},
    {942, "Permissive Cross-domain Policy with Untrusted Domains"},
    {1004, "Sensitive Cookie Without 'HttpOnly' Flag"},
    {1021, "Improper Restriction of Rendered UI Layers or Frames"},
    {1039, "Automated Recognition Mechanism with Inadequate Detection or Handling of Adversarial Input Perturbations"},
    {1188, "Insecure Default Initialization of Resource"},
    {1211, "Authentication Errors"},
    {1214, "Data Integrity Issues"},
    {1220, "Insufficient Granularity of Access Control"},
    {1231, "Improper Prevention of Lock Bit Modification"},
    {1240, "Use of a Cryptographic Primitive with a Risky Implementation"},
    {1256, "Improper Restriction of Software Interfaces to Hardware Features"},
    {1263, "Improper Physical Access Control"},
    {1270, "Generation of Incorrect Security Tokens"},
    {1275, "Sensitive Cookie with Improper SameSite Attribute"},
    {1300, "Improper Protection of Physical Side Channels"},
    {1311, "Improper Translation of Security Attributes by Fabric Bridge"},
    {1321, "Improperly Controlled Modification of Object Prototype Attributes ('Prototype Pollution')"},
    {1327, "Binding to an Unrestricted IP Address"},
    {1331, "Improper Isolation of Shared Resources in Network On Chip (NoC)"},
    {1333, "Inefficient Regular Expression Complexity"},
    {1385, "Missing Origin Validation in WebSockets"},
};

}  // namespace

std::optional<std::string_view> cwe_name(int id) noexcept {
  const auto* it = std::lower_bound(std::begin(kCatalog), std::end(kCatalog), id,
                                    [](const Entry& e, int v) { return e.id < v; });
  if (it == std::end(kCatalog) || it->id != id) return std::nullopt;
  return it->name;
}

std::optional<std::string> cwe_short_name(int id) {
  auto name = cwe_name(id);
  if (!name) return std::nullopt;
  std::string_view n = *name;
  if (n.ends_with("')")) {
    const auto open = n.rfind(" ('");
    if (open != std::string_view::npos) n = n.substr(0, open);
  }
  return std::string(n);
}

}  // namespace postural
