import math
import unittest

from src.core.errors import DomainError
from src.core.neutrosophic import (
    BinaryEstimate,
    EpistemicPosition,
    LossDeclaration,
    ScalarTIF,
    TensorEvaluation,
    classify_position,
    entropy_indeterminacy,
    is_hyper_truth,
    s3_to_tif,
    tif_sum,
)


class TestScalarTIF(unittest.TestCase):

    def test_components_outside_unit_interval_are_rejected(self):
        for triple in ((1.2, 0.0, 0.0), (0.0, -0.1, 0.0), (0.0, 0.0, float("nan"))):
            with self.assertRaises(DomainError):
                ScalarTIF(*triple)

    def test_boolean_component_is_rejected(self):
        with self.assertRaises(DomainError):
            ScalarTIF(True, 0.0, 0.0)

    def test_sum_spans_zero_to_three(self):
        self.assertEqual(tif_sum(ScalarTIF(0.0, 0.0, 0.0)), 0.0)
        self.assertEqual(tif_sum(ScalarTIF(1.0, 1.0, 1.0)), 3.0)

    def test_hyper_truth_is_strict(self):
        self.assertFalse(is_hyper_truth(ScalarTIF(0.5, 0.0, 0.5)))
        self.assertFalse(is_hyper_truth(ScalarTIF(0.2, 0.3, 0.5)))
        self.assertTrue(is_hyper_truth(ScalarTIF(0.5, 1.0, 0.5)))
        self.assertTrue(is_hyper_truth(ScalarTIF(0.5, 0.01, 0.5)))


class TestEntropy(unittest.TestCase):

    def test_entropy_endpoints_and_midpoint(self):
        self.assertEqual(entropy_indeterminacy(0.0), 0.0)
        self.assertEqual(entropy_indeterminacy(1.0), 0.0)
        self.assertEqual(entropy_indeterminacy(0.5), 1.0)

    def test_entropy_is_symmetric(self):
        for p in (0.01, 0.1, 0.3, 0.45):
            self.assertAlmostEqual(entropy_indeterminacy(p), entropy_indeterminacy(1.0 - p), places=12)

    def test_entropy_known_value(self):
        expected = -(0.9 * math.log2(0.9) + 0.1 * math.log2(0.1))
        self.assertAlmostEqual(entropy_indeterminacy(0.9), expected, places=12)

    def test_entropy_out_of_domain(self):
        with self.assertRaises(DomainError):
            entropy_indeterminacy(1.5)

    def test_s3_mapping_sums_to_one_plus_entropy(self):
        for p in (0.0, 0.05, 0.25, 0.5, 0.8, 1.0):
            estimate = BinaryEstimate(p, 1.0 - p)
            scalar = s3_to_tif(estimate)
            self.assertEqual(scalar.t, p)
            self.assertAlmostEqual(scalar.sum, 1.0 + entropy_indeterminacy(p), delta=1e-12)

    def test_binary_estimate_requires_unit_sum(self):
        with self.assertRaises(DomainError):
            BinaryEstimate(0.6, 0.6)
        BinaryEstimate(0.3, 0.7000001)


class TestLossesAndTensor(unittest.TestCase):

    def test_loss_requires_text_and_unit_severity(self):
        with self.assertRaises(DomainError):
            LossDeclaration("", "why", 0.5)
        with self.assertRaises(DomainError):
            LossDeclaration("what", "why", 1.5)

    def test_tensor_severity_summaries(self):
        tensor = TensorEvaluation(
            ScalarTIF(0.1, 0.8, 0.1),
            [LossDeclaration("a", "x", 0.2), LossDeclaration("b", "y", 0.9)],
        )
        self.assertEqual(tensor.max_severity, 0.9)
        self.assertAlmostEqual(tensor.mean_severity, 0.55)
        self.assertIsInstance(tensor.losses, tuple)

    def test_scalar_only_tensor_has_no_severity(self):
        tensor = TensorEvaluation(ScalarTIF(0.1, 0.8, 0.1))
        self.assertIsNone(tensor.max_severity)
        self.assertIsNone(tensor.mean_severity)


class TestClassifyPosition(unittest.TestCase):

    def test_templates(self):
        self.assertEqual(classify_position(ScalarTIF(0.5, 1.0, 0.5)), EpistemicPosition.SATURATION)
        self.assertEqual(classify_position(ScalarTIF(0.5, 0.5, 0.5)), EpistemicPosition.BALANCED_CONFLICT)
        self.assertEqual(classify_position(ScalarTIF(0.0, 1.0, 0.0)), EpistemicPosition.ABSORPTION)
        self.assertEqual(classify_position(ScalarTIF(0.9, 0.1, 0.1)), EpistemicPosition.OTHER)

    def test_tolerance_boundaries(self):
        self.assertEqual(classify_position(ScalarTIF(0.55, 0.95, 0.45)), EpistemicPosition.SATURATION)
        self.assertEqual(classify_position(ScalarTIF(0.56, 1.0, 0.5)), EpistemicPosition.OTHER)
        self.assertEqual(classify_position(ScalarTIF(0.05, 0.95, 0.05)), EpistemicPosition.ABSORPTION)
        self.assertEqual(classify_position(ScalarTIF(0.0, 1.0, 0.0), tol=0.0), EpistemicPosition.ABSORPTION)

    def test_tolerance_domain(self):
        for tol in (-0.01, 0.25, 0.3):
            with self.assertRaises(DomainError):
                classify_position(ScalarTIF(0.5, 0.5, 0.5), tol=tol)


if __name__ == '__main__':
    unittest.main()
