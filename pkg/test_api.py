"""
Tests for the web service endpoints.
"""
import os
import sys

from fastapi.testclient import TestClient

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from api import app
from config import VERSION

client = TestClient(app)


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "healthy"
    assert body["version"] == VERSION


def test_compile():
    response = client.post("/compile", json={"A": 2, "l": 3, "K": 8, "delta_omega": 100.0})
    assert response.status_code == 200
    body = response.json()
    assert body["qpulse_count"] == 3 + 15 + 13
    assert body["physical_pulse_count"] > body["qpulse_count"]
    assert body["gates"][0].startswith("Right F(0)")
    assert body["schedule"].startswith("# A=2\n")

    response = client.post("/compile", json={"A": 1, "l": 1, "K": 8, "include_schedule": False})
    assert response.status_code == 200
    assert response.json()["schedule"] is None


def test_compile_rejects_bad_input():
    assert client.post("/compile", json={"A": 8, "l": 3, "K": 8}).status_code == 422
    assert client.post("/compile", json={"A": 0, "l": 0}).status_code == 422
    assert client.post("/compile", json={"A": 0, "l": 2, "delta_omega": 1.0}).status_code == 422


def test_verify():
    response = client.post("/verify", json={"K": 8, "quick": True})
    assert response.status_code == 200
    checks = response.json()["checks"]
    assert checks and all(c["passed"] for c in checks)


TESTS = [
    ("Health", test_health),
    ("Compile", test_compile),
    ("Compile input errors", test_compile_rejects_bad_input),
    ("Verify", test_verify),
]


def main():
    """Run all tests."""
    print("\n" + "=" * 50)
    print("  API - Test Suite")
    print("=" * 50)

    results = {}
    for name, test in TESTS:
        try:
            test()
            results[name] = True
        except Exception as e:
            print(f"❌ {name} failed: {e!r}")
            results[name] = False

    print("\n" + "=" * 50)
    print("TEST SUMMARY")
    print("=" * 50)
    for name, passed in results.items():
        print(f"  {'✓ PASS' if passed else '✗ FAIL'}: {name}")
    total_passed = sum(results.values())
    print(f"\nTotal: {total_passed}/{len(results)} tests passed")
    return total_passed == len(results)


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
