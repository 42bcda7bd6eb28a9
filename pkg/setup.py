from setuptools import setup, find_packages

packages = find_packages(exclude=['examples', 'examples.*'])
packages.remove('sample_project')
setup(
    name='django-chdg',
    version='0.1.0',
    author='Caktus Consulting Group',
    author_email='solutions@caktusgroup.com',
    packages=packages,
    install_requires = [
        'Django>=3.2',
        'numpy>=1.22',
        'scipy>=1.8',
    ],
    extras_require = {
        'ci': ['unittest-xml-reporting', 'pytest'],
    },
    entry_points = {
        'console_scripts': ['chdg = chdg.cli:main'],
    },
    include_package_data = True,
    exclude_package_data={
        '': ['*.pyc',],
    },
    license='LICENSE.txt',
    description='Interior penalty discontinuous Galerkin solver for the Cahn-Hilliard equation',
    long_description=open('README.txt').read(),
)
