from django.core.cache import cache
from django.test import SimpleTestCase

from fractal_interp.error_handlers import ErrorHandlerMixin
from fractal_interp.errors import (
    BaseCornerMismatch,
    ContractionViolation,
    FifError,
    NotConverged,
    SchemaError,
)
from fractal_interp.monitoring import PerformanceMonitor


class ErrorHandlerTests(SimpleTestCase):
    def setUp(self):
        self.handler = ErrorHandlerMixin()

    def test_known_codes_get_their_message(self):
        with self.assertLogs('fractal_interp.error_handlers', level='ERROR') as logs:
            error = self.handler.handle_error(SchemaError('expected a number', 'alpha'), command='construct')
        self.assertEqual(error.returncode, 1)
        self.assertTrue(str(error).startswith('The configuration file is invalid. [schema_error]'))
        self.assertIn('Command: construct', logs.output[0])

    def test_exit_codes_follow_the_error_family(self):
        with self.assertLogs('fractal_interp.error_handlers', level='ERROR'):
            mismatch = self.handler.handle_error(BaseCornerMismatch('corners differ'))
            stalled = self.handler.handle_error(NotConverged('stalled'))
        self.assertEqual(mismatch.returncode, 2)
        self.assertEqual(stalled.returncode, 3)

    def test_unlisted_codes_fall_back_to_their_family(self):
        with self.assertLogs('fractal_interp.error_handlers', level='ERROR'):
            error = self.handler.handle_error(ContractionViolation('gamma too large'))
            general = self.handler.handle_error(FifError('something else'))
        self.assertTrue(str(error).startswith('A verification check failed. [contraction_violation]'))
        self.assertEqual(error.returncode, 2)
        self.assertTrue(str(general).startswith('The command could not run.'))
        self.assertEqual(general.returncode, 1)


class PerformanceMonitorTests(SimpleTestCase):
    def setUp(self):
        cache.clear()

    def test_empty_summary(self):
        self.assertEqual(PerformanceMonitor.get_summary('construct')['status'], 'idle')

    def test_record_and_summarise(self):
        PerformanceMonitor.record('construct', 1.0)
        PerformanceMonitor.record('construct', 3.0, cells=4)
        PerformanceMonitor.record('study', 9.0)
        summary = PerformanceMonitor.get_summary('construct')
        self.assertEqual(summary['runs'], 2)
        self.assertEqual(summary['avg_seconds'], 2.0)
        self.assertEqual(summary['max_seconds'], 3.0)
        self.assertEqual(summary['last_seconds'], 3.0)
        self.assertEqual(summary['status'], 'healthy')
        self.assertEqual(PerformanceMonitor.get_summary()['runs'], 3)
        self.assertEqual(PerformanceMonitor.recent('construct')[-1]['cells'], 4)

    def test_slow_runs(self):
        PerformanceMonitor.record('solve', PerformanceMonitor.SLOW_SECONDS + 1.0)
        self.assertEqual(PerformanceMonitor.get_summary('solve')['status'], 'slow')

    def test_timed_records_even_on_error(self):
        with self.assertRaises(RuntimeError):
            with PerformanceMonitor.timed('attractor', depth=3):
                raise RuntimeError('boom')
        entry = PerformanceMonitor.recent('attractor')[0]
        self.assertEqual(entry['depth'], 3)
        self.assertGreaterEqual(entry['seconds'], 0.0)

    def test_keeps_only_recent_runs(self):
        for index in range(PerformanceMonitor.KEEP + 5):
            PerformanceMonitor.record('solve', float(index))
        timings = PerformanceMonitor.recent()
        self.assertEqual(len(timings), PerformanceMonitor.KEEP)
        self.assertEqual(timings[0]['seconds'], 5.0)
