import io
import json

from errors import ArtifactIOError, InvalidDimensionError, NoMajorityError
from responses import EXIT_ALGORITHM, EXIT_INTERNAL, EXIT_IO, EXIT_VALIDATION, ErrorHandler, RunResponse


def test_success_envelope():
    response, code = RunResponse.success({'value': 1})
    assert code == 0
    assert response['status'] == 'success'


def test_validation_errors_are_flattened():
    response, code = ErrorHandler.handle_validation_error({'m': ['Must be greater than or equal to 1.']})
    assert code == EXIT_VALIDATION
    assert response['errors'] == {'m': 'Must be greater than or equal to 1.'}


def test_exit_codes_follow_error_type():
    assert ErrorHandler.handle_exception(InvalidDimensionError('n'))[1] == EXIT_VALIDATION
    assert ErrorHandler.handle_exception(ArtifactIOError('disk'))[1] == EXIT_IO
    assert ErrorHandler.handle_exception(RuntimeError('boom'))[1] == EXIT_INTERNAL


def test_no_majority_carries_cluster_sizes():
    response, code = ErrorHandler.handle_exception(NoMajorityError('none', [1, 2, 1]))
    assert code == EXIT_ALGORITHM
    assert response['data'] == {'cluster_sizes': [1, 2, 1]}


def test_emit_writes_one_json_document():
    stream = io.StringIO()
    RunResponse.emit({'status': 'success', 'value': 0.5}, stream)
    assert json.loads(stream.getvalue()) == {'status': 'success', 'value': 0.5}
