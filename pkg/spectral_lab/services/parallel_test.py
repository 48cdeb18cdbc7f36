"""Tests for the ordered thread-pool map."""

from spectral_lab.services.parallel import map_ordered, thread_count


def test_results_keep_input_order(monkeypatch):
  monkeypatch.setenv('LAB_THREADS', '4')
  assert map_ordered(lambda x: x * x, range(20)) == [x * x for x in range(20)]


def test_thread_count_env(monkeypatch):
  monkeypatch.setenv('LAB_THREADS', '1')
  assert thread_count() == 1
  monkeypatch.setenv('LAB_THREADS', 'many')
  assert thread_count() >= 1
  monkeypatch.setenv('LAB_THREADS', '0')
  assert thread_count() == 1
