#include "teb/crypto.hpp"

#include <catch_amalgamated.hpp>

using namespace teb;
using namespace teb::crypto;

TEST_CASE("sha256 known answers")
{
  CHECK(toHex(sha256Bytes({})) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  Bytes abc = toBytes("abc");
  CHECK(toHex(sha256Bytes(abc)) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(digestHex(abc, 7) == "ba7816b");
  CHECK(digestHex(abc, 8) == "ba7816bf");
}

TEST_CASE("drbg is deterministic and forks are independent")
{
  Drbg a(123);
  Drbg b(123);
  CHECK(a.bytes(40) == b.bytes(40));
  CHECK(a.u64() == b.u64());

  Drbg c(124);
  CHECK(Drbg(123).bytes(16) != c.bytes(16));

  Drbg parent(5);
  Bytes before = Drbg(5).bytes(16);
  Drbg childA = parent.fork("alpha");
  Drbg childB = parent.fork("beta");
  CHECK(childA.bytes(16) != childB.bytes(16));
  CHECK(parent.bytes(16) == before); // forking does not consume parent output
  CHECK(Drbg(5).fork("alpha").bytes(16) == Drbg(5).fork("alpha").bytes(16));
}

TEST_CASE("ed25519 keys, signatures")
{
  Bytes seed = toBytes("device seed");
  AsymKeyPair kp1 = keyPairFromSeed(seed);
  AsymKeyPair kp2 = keyPairFromSeed(seed);
  CHECK(kp1 == kp2);
  CHECK(kp1.pub.size() == 32);

  Drbg rng(9);
  AsymKeyPair kp3 = generateKeyPair(rng);
  CHECK(kp3.pub != kp1.pub);

  Bytes msg = toBytes("message");
  Bytes sig = sign(kp1.priv, msg);
  CHECK(verify(kp1.pub, msg, sig));
  CHECK_FALSE(verify(kp3.pub, msg, sig));
  Bytes altered = msg;
  altered[0] ^= 1;
  CHECK_FALSE(verify(kp1.pub, altered, sig));
  Bytes badSig = sig;
  badSig[5] ^= 1;
  CHECK_FALSE(verify(kp1.pub, msg, badSig));
  CHECK_FALSE(verify(kp1.pub, msg, Bytes{1, 2, 3}));
}

TEST_CASE("key agreement is symmetric")
{
  Drbg rng(31);
  AsymKeyPair a = generateKeyPair(rng);
  AsymKeyPair b = generateKeyPair(rng);
  AsymKeyPair c = generateKeyPair(rng);
  SymKey ab = dh(a.priv, b.pub);
  SymKey ba = dh(b.priv, a.pub);
  CHECK(ab == ba);
  CHECK(dh(a.priv, c.pub) != ab);
  CHECK_THROWS_AS(dh(a.priv, Bytes{1, 2, 3}), InvalidPoint);
}

TEST_CASE("aead round trips and authenticates")
{
  Drbg rng(37);
  SymKey key = SymKey::random(rng);
  Bytes plain = toBytes("attack at dawn");
  Bytes ad = toBytes("header");

  Bytes box = aeadEncrypt(key, plain, ad, 1);
  CHECK(aeadDecrypt(key, box, ad) == plain);

  CHECK(aeadEncrypt(key, {}, {}, 0).size() == 12 + 16);
  CHECK(aeadDecrypt(key, aeadEncrypt(key, {}, {}, 0), {}).empty());

  // counters change the nonce, so ciphertexts differ
  CHECK(aeadEncrypt(key, plain, ad, 1) != aeadEncrypt(key, plain, ad, 2));

  SymKey wrong = SymKey::random(rng);
  CHECK_THROWS_AS(aeadDecrypt(wrong, box, ad), AuthFailure);
  CHECK_THROWS_AS(aeadDecrypt(key, box, toBytes("other")), AuthFailure);
  Bytes tampered = box;
  tampered[tampered.size() - 1] ^= 1;
  CHECK_THROWS_AS(aeadDecrypt(key, tampered, ad), AuthFailure);
  CHECK_THROWS_AS(aeadDecrypt(key, Bytes{1, 2, 3}, ad), AuthFailure);
}

TEST_CASE("hmac verifies and rejects tampering")
{
  Drbg rng(41);
  SymKey key = SymKey::random(rng);
  Bytes msg = toBytes("sign-on");
  Bytes mac = hmac(key, msg);
  CHECK(hmacVerify(key, msg, mac));
  Bytes altered = msg;
  altered[0] ^= 1;
  CHECK_FALSE(hmacVerify(key, altered, mac));
  CHECK_FALSE(hmacVerify(SymKey::random(rng), msg, mac));
  CHECK_FALSE(hmacVerify(key, msg, Bytes{1}));
}

namespace {

void
exercisePake(PakeKind kind)
{
  CAPTURE(static_cast<int>(kind));

  SECTION("matching passwords agree and confirm")
  {
    Pake alice(PakeRole::Initiator, "orchid", Drbg(100), kind);
    Pake bob(PakeRole::Responder, "orchid", Drbg(200), kind);
    Bytes shareA = alice.start();
    Bytes shareB = bob.start();
    Bytes tagA = alice.finish(shareB);
    Bytes tagB = bob.finish(shareA);
    CHECK(alice.sessionKey() == bob.sessionKey());
    CHECK(alice.confirm(tagB));
    CHECK(bob.confirm(tagA));
  }

  SECTION("password mismatch fails confirmation on both sides")
  {
    Pake alice(PakeRole::Initiator, "orchid", Drbg(100), kind);
    Pake bob(PakeRole::Responder, "orchld", Drbg(200), kind);
    Bytes shareA = alice.start();
    Bytes shareB = bob.start();
    Bytes tagA = alice.finish(shareB);
    Bytes tagB = bob.finish(shareA);
    CHECK_FALSE(alice.confirm(tagB));
    CHECK_FALSE(bob.confirm(tagA));
    CHECK(alice.sessionKey() != bob.sessionKey());
  }

  SECTION("replayed share against a fresh session yields a fresh key")
  {
    Pake alice(PakeRole::Initiator, "orchid", Drbg(100), kind);
    Bytes shareA = alice.start();

    Pake bob1(PakeRole::Responder, "orchid", Drbg(200), kind);
    bob1.start();
    bob1.finish(shareA);
    Pake bob2(PakeRole::Responder, "orchid", Drbg(201), kind);
    bob2.start();
    bob2.finish(shareA);
    CHECK(bob1.sessionKey() != bob2.sessionKey());
  }

  SECTION("same seeds reproduce the same shares")
  {
    Pake p1(PakeRole::Initiator, "orchid", Drbg(300), kind);
    Pake p2(PakeRole::Initiator, "orchid", Drbg(300), kind);
    CHECK(p1.start() == p2.start());
  }

  SECTION("step order is enforced")
  {
    Pake p(PakeRole::Initiator, "orchid", Drbg(100), kind);
    CHECK_THROWS_AS(p.finish(Bytes(32)), ProtocolOrder);
    CHECK_THROWS_AS(p.sessionKey(), ProtocolOrder);
    p.start();
    CHECK_THROWS_AS(p.start(), ProtocolOrder);
    CHECK_THROWS_AS(p.confirm(Bytes(32)), ProtocolOrder);
    CHECK_THROWS_AS(p.finish(Bytes{1, 2}), InvalidPoint);
    Pake q(PakeRole::Responder, "orchid", Drbg(200), kind);
    Bytes shareQ = q.start();
    p.finish(shareQ);
    CHECK_THROWS_AS(p.finish(shareQ), ProtocolOrder);
  }
}

} // namespace

TEST_CASE("pake over ristretto255")
{
  exercisePake(PakeKind::Spake2);
}

TEST_CASE("pake with test-grade DH construction")
{
  exercisePake(PakeKind::DhMac);
}

TEST_CASE("spake2 share hides under the password blinding")
{
  // the same secret-scalar randomness with different passwords must yield
  // different public shares (the blinding term depends on the password)
  Pake p1(PakeRole::Initiator, "left", Drbg(7), PakeKind::Spake2);
  Pake p2(PakeRole::Initiator, "right", Drbg(7), PakeKind::Spake2);
  CHECK(p1.start() != p2.start());
}
