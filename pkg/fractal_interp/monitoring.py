from contextlib import contextmanager
from django.core.cache import cache
import logging
import time

logger = logging.getLogger(__name__)


class PerformanceMonitor:
    """Keeps recent solve timings in the cache"""

    CACHE_KEY = 'fif_recent_timings'
    KEEP = 50
    SLOW_SECONDS = 5.0

    @staticmethod
    def record(label, duration, **extra):
        """Record one timed run"""
        timings = cache.get(PerformanceMonitor.CACHE_KEY, [])
        timings.append({'label': label, 'seconds': duration, **extra})
        cache.set(PerformanceMonitor.CACHE_KEY, timings[-PerformanceMonitor.KEEP:], None)
        logger.debug(f'{label} took {duration:.3f}s')

    @staticmethod
    @contextmanager
    def timed(label, **extra):
        start_time = time.perf_counter()
        try:
            yield
        finally:
            PerformanceMonitor.record(label, time.perf_counter() - start_time, **extra)

    @staticmethod
    def recent(label=None):
        timings = cache.get(PerformanceMonitor.CACHE_KEY, [])
        return [entry for entry in timings if label is None or entry['label'] == label]

    @staticmethod
    def get_summary(label=None):
        """Average and worst of the recent runs"""
        timings = PerformanceMonitor.recent(label)
        if not timings:
            return {'runs': 0, 'avg_seconds': 0.0, 'max_seconds': 0.0, 'status': 'idle'}

        seconds = [entry['seconds'] for entry in timings]
        avg_seconds = sum(seconds) / len(seconds)
        return {
            'runs': len(seconds),
            'avg_seconds': avg_seconds,
            'max_seconds': max(seconds),
            'last_seconds': seconds[-1],
            'status': 'healthy' if avg_seconds < PerformanceMonitor.SLOW_SECONDS else 'slow',
        }
