import os

# BLAS threading must be fixed before numpy is imported
THREAD_VARIABLES = ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS')


def configure_threads(environ=os.environ):
    """
    Sets the BLAS thread variables to ``EMOSEG_THREADS`` (1 if unset).

    :return: the thread count as a string
    """
    threads = environ.get('EMOSEG_THREADS', '1')
    for variable in THREAD_VARIABLES:
        environ[variable] = threads
    return threads


configure_threads()
