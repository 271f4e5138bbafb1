"""
Tests for Exception Classes

Tests custom exception context attributes and error messages.
"""

from vanetsim.exceptions import (
    ControlError,
    ControlServerError,
    InvalidStateCharacterError,
    NetworkBuildError,
    OutputError,
    ScenarioError,
    ScenarioValidationError,
    SchemaError,
    SignalError,
    StateLengthError,
    VanetSimError,
    XMLParseError,
)


class TestCustomExceptions:
    """Test suite for custom exception classes."""

    def test_xml_parse_error(self):
        """Test XMLParseError keeps source, line and column."""
        error = XMLParseError("cross.nod.xml", 3, 14, "mismatched tag")

        assert str(error).startswith("cross.nod.xml:3:14")
        assert "mismatched tag" in str(error)
        assert error.line == 3
        assert error.column == 14
        assert isinstance(error, ScenarioError)

    def test_schema_error(self):
        """Test SchemaError names element and attribute."""
        error = SchemaError("edge", "length", "must be > 0", source="cross.edg.xml")

        assert "<edge>" in str(error)
        assert "'length'" in str(error)
        assert "cross.edg.xml" in str(error)
        assert error.attribute == "length"

    def test_network_build_error_with_gaps(self):
        """Test NetworkBuildError lists missing link indices."""
        error = NetworkBuildError("link indices are not contiguous", gaps=[2, 5])

        assert error.gaps == [2, 5]
        assert "2, 5" in str(error)

    def test_network_build_error_without_gaps(self):
        error = NetworkBuildError("duplicate node id 'C'")

        assert error.gaps == []
        assert str(error) == "duplicate node id 'C'"

    def test_state_length_error(self):
        """Test StateLengthError reports light id and both lengths."""
        error = StateLengthError("1274361418", 10, 9, source="tjunction.tll.xml", detail="phase 1")

        assert "1274361418" in str(error)
        assert "10" in str(error) and "9" in str(error)
        assert "phase 1" in str(error)
        assert error.expected == 10
        assert error.actual == 9
        assert isinstance(error, ScenarioValidationError)

    def test_invalid_state_character(self):
        error = InvalidStateCharacterError("q")

        assert "'q'" in str(error)
        assert error.character == "q"
        assert isinstance(error, SignalError)

    def test_control_error_renders_err_line(self):
        """Test ControlError message matches the protocol ERR line."""
        error = ControlError(ControlError.UNKNOWN_ID, "unknown traffic light 'X'")

        assert str(error) == "ERR 2 unknown traffic light 'X'"
        assert error.code == 2

    def test_control_server_error(self):
        error = ControlServerError("127.0.0.1", 8813, "Address already in use")

        assert "127.0.0.1:8813" in str(error)
        assert error.port == 8813

    def test_output_error(self):
        error = OutputError("/readonly/metrics.csv", "Permission denied")

        assert "/readonly/metrics.csv" in str(error)
        assert error.reason == "Permission denied"

    def test_hierarchy(self):
        """All simulator errors share a common base."""
        for error in (
            SchemaError("a", "b", "c"),
            ControlError(1, "x"),
            OutputError("p", "r"),
            InvalidStateCharacterError("x"),
        ):
            assert isinstance(error, VanetSimError)
