from setuptools import setup

setup(
    name='EmoSeg',
    version='0.1.0',
    packages=['src', 'src.tensor_core', 'src.data_management', 'src.model_construction', 'src.evaluation'],
    url='',
    license='',
    author='',
    author_email='',
    description='Moving object segmentation supervised by event camera priors',
    install_requires=['numpy>=1.21.6', 'dill>=0.3.6', 'pandas>=1.3.5', 'scipy>=1.7.3', 'matplotlib>=3.5.3',
                      'openpyxl', 'Pillow>=9.1.0', 'tqdm>=4.64.0'],
    entry_points={'console_scripts': ['emoseg = src.commands:main']},
)
